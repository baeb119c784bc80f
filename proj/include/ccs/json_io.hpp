#pragma once

#include <nlohmann/json.hpp>

#include "ccs/doc_model.hpp"

// JSON mappings of the doc-model types. nlohmann::json keeps object keys in a
// std::map, so dump() without indentation is already canonical.
namespace ccs {

nlohmann::json to_json(const BBox& b);
BBox bbox_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Cell& c);
nlohmann::json to_json(const Page& p);
nlohmann::json to_json(const ParsedDocument& d);
nlohmann::json to_json(const StructuredDocument& d);

Page page_from_json(const nlohmann::json& j);
/// Structural decoding only; invariants are checked by deserialize_document.
ParsedDocument document_from_json(const nlohmann::json& j);
StructuredDocument structured_from_json(const nlohmann::json& j);

}  // namespace ccs
