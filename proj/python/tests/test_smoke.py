import json
from fractions import Fraction

import pytest

import ccs


@pytest.fixture(scope="module")
def corpus():
    return ccs.generate_synthetic_corpus(20, seed=11)


@pytest.fixture(scope="module")
def model(corpus):
    return ccs.train(corpus["documents"], corpus["labels"], corpus["label_names"], n_trees=8, seed=2)


def half_up(num, den):
    # hundredths of a percent, rounded half-up, as a float with two decimals
    q = Fraction(10000 * num, den)
    return int(q + Fraction(1, 2)) / 100


def test_parse_matches_generated_documents(corpus):
    for pdf, doc in zip(corpus["pdfs"], corpus["documents"]):
        text, warnings = ccs.parse_pdf(pdf)
        assert text == doc
        assert ccs.validate_document(text) == []
        assert all(isinstance(p, int) for p, _ in warnings)


def test_validation_reports_broken_boxes(corpus):
    doc = ccs.load_document(corpus["documents"][0])
    cell = doc["pages"][0]["cells"][0]
    cell["bbox"] = [cell["bbox"][2], cell["bbox"][1], cell["bbox"][0] - 1, cell["bbox"][3]]
    assert ("BBox.order", "page 1, cell 0") in ccs.validate_document(json.dumps(doc))


def test_errors_carry_codes():
    with pytest.raises(ccs.Error, match="^malformed|^syntax"):
        ccs.parse_pdf(b"%PDF-1.4 nothing here")
    with pytest.raises(ValueError):
        ccs.recall_precision([[1]], ["A", "B"])


def test_model_bytes_are_deterministic(corpus, model):
    again = ccs.train(corpus["documents"], corpus["labels"], corpus["label_names"], n_trees=8, seed=2, workers=3)
    assert again == model


def test_predict_and_convert(corpus, model):
    preds = ccs.predict(model, corpus["documents"][0])
    doc = ccs.load_document(corpus["documents"][0])
    assert [len(p) for p in preds] == [len(p["cells"]) for p in doc["pages"]]
    assert all(label in corpus["label_names"] and 0 < conf <= 1 for page in preds for label, conf in page)

    from_pdf = ccs.convert(model, corpus["pdfs"][0], workers=1)
    from_doc = ccs.convert(model, corpus["documents"][0], workers=4)
    assert from_pdf == from_doc
    structured = json.loads(from_pdf["json"])
    ids = sorted((e["page"], c) for e in structured["elements"] for c in e["source_cell_ids"])
    assert ids == sorted((p["number"], c["id"]) for p in doc["pages"] for c in p["cells"])
    assert from_pdf["markdown"].startswith("# ")


def test_reading_order_two_columns():
    boxes = [(320, 700, 540, 710), (72, 700, 280, 710), (320, 680, 540, 690), (72, 680, 280, 690)]
    assert ccs.reading_order(boxes) == [1, 3, 0, 2]
    assert sorted(ccs.reading_order(boxes, min_gap=100)) == [0, 1, 2, 3]


def test_published_table_arithmetic():
    t = ccs.published_table()
    computed = ccs.recall_precision(t["counts"], t["labels"])
    n = len(t["labels"])
    for i, m in enumerate(computed):
        row = sum(t["counts"][i])
        col = sum(t["counts"][r][i] for r in range(n))
        assert m["recall"] == half_up(t["counts"][i][i], row)
        assert m["precision"] == half_up(t["counts"][i][i], col)
    off = ccs.compare_published()
    assert [(d["label"], d["metric"]) for d in off] == [("Picture", "recall")]
    assert off[0]["computed"] == 99.29 and off[0]["published"] == 99.24


def test_cross_validate_report(corpus):
    report = json.loads(
        ccs.cross_validate(corpus["documents"], corpus["labels"], corpus["label_names"], k=2, seed=1, n_trees=5)
    )
    assert report["k"] == 2
    assert len(report["folds"]) == 2
    labelled = sum(len(json.loads(l)["labels"]) for l in corpus["labels"])
    assert sum(sum(r) for r in report["aggregate"]) == labelled


def test_benchmark_csv(corpus, model):
    csv = ccs.benchmark(corpus["pdfs"][:2], model, [1], min_pages=1)
    header, row = csv.strip().split("\n")
    assert header == "workers,pages,seconds,pages_per_sec"
    assert row.startswith("1,")
    with pytest.raises(ccs.Error, match="corpus too small"):
        ccs.benchmark(corpus["pdfs"][:1], model, [1])
