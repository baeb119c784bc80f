#pragma once

#include <stdexcept>
#include <string>

namespace ccs {

enum class Errc {
  syntax,            // malformed bytes (JSON, PDF tokens)
  invariant,         // value violates a type invariant
  unsupported,       // outside the supported PDF subset
  malformed,         // structurally broken PDF
  invalid_argument,  // caller passed bad parameters
  not_found,         // unknown id / page / cell / label
  conflict,          // stale label-set version
  schema_mismatch,   // feature vector or model schema disagrees
  version,           // unknown file format version
  checksum,          // corrupted model payload
  empty_selection,   // nothing to export / train on
  busy,              // bounded queue full
  internal,
};

const char* to_string(Errc code) noexcept;

/// Library-wide exception. Every error raised by ccs carries a machine
/// readable code so the service layer can map it onto an HTTP status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ccs
