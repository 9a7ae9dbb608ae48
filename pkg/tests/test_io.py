"""Ingestion, label/selection round-trips, and versioned array storage."""

import json
import math

import numpy as np
import pytest

from dppselect import DppLabels, IngestError, InvalidInput, ingest
from dppselect.io import (ARRAY_FORMAT, ARRAY_VERSION, load_arrays,
                          read_labels, read_selections, save_arrays,
                          write_labels, write_selections)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def article_row(art_id="a1", dim=3, n_images=2, **extra):
    row = {
        "id": art_id,
        "text_embedding": [1.0] + [0.0] * (dim - 1),
        "images": [
            {"id": f"{art_id}-i{k}",
             "embedding": [0.0] * k + [1.0] + [0.0] * (dim - 1 - k)}
            for k in range(n_images)
        ],
    }
    row.update(extra)
    return row


class TestIngest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert ingest(str(path)) == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        path.write_text(json.dumps(article_row()) + "\n\n   \n")
        articles = ingest(str(path))
        assert len(articles) == 1
        assert articles[0].id == "a1"

    def test_embeddings_renormalized(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        write_jsonl(path, [{
            "id": "a1",
            "text_embedding": [3.0, 4.0],
            "images": [{"id": "i0", "embedding": [0.0, 0.5]}],
        }])
        art = ingest(str(path))[0]
        np.testing.assert_allclose(art.text_embedding, [0.6, 0.8], rtol=1e-15)
        np.testing.assert_allclose(art.images[0].embedding, [0.0, 1.0])

    def test_pool_capped_to_first_images(self, tmp_path):
        path = tmp_path / "big.jsonl"
        write_jsonl(path, [article_row(dim=8, n_images=8)])
        art = ingest(str(path), pool_cap=5)[0]
        assert art.n_images == 5
        assert list(art.image_ids) == ["a1-i0", "a1-i1", "a1-i2", "a1-i3", "a1-i4"]

    def test_default_pool_cap_is_five(self, tmp_path):
        path = tmp_path / "seven.jsonl"
        write_jsonl(path, [article_row(dim=8, n_images=7)])
        assert ingest(str(path))[0].n_images == 5

    def test_gold_flags_roundtrip(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        row = article_row()
        row["images"][0]["gold"] = True
        row["images"][1]["gold"] = False
        write_jsonl(path, [row])
        art = ingest(str(path))[0]
        assert art.images[0].gold is True
        assert art.images[1].gold is False
        assert set(art.gold_ids()) == {"a1-i0"}
        assert art.has_gold()

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(article_row()) + "\n{oops\n")
        with pytest.raises(IngestError) as exc:
            ingest(str(path))
        assert exc.value.line_no == 2
        assert "line 2" in str(exc.value)

    @pytest.mark.parametrize("mutate, fragment", [
        (lambda r: r.pop("id"), "missing field 'id'"),
        (lambda r: r.pop("text_embedding"), "text_embedding"),
        (lambda r: r.pop("images"), "images"),
        (lambda r: r.update(images=[]), "nonempty"),
        (lambda r: r.update(text_embedding=[]), "nonempty"),
        (lambda r: r.update(text_embedding=["x", "y"]), "numbers"),
        (lambda r: r.update(id=""), "id"),
    ])
    def test_malformed_rows_rejected(self, tmp_path, mutate, fragment):
        row = article_row()
        mutate(row)
        path = tmp_path / "bad.jsonl"
        write_jsonl(path, [row])
        with pytest.raises(IngestError) as exc:
            ingest(str(path))
        assert exc.value.line_no == 1
        assert fragment in str(exc.value)

    def test_ragged_image_dimension_rejected(self, tmp_path):
        row = article_row()
        row["images"][1]["embedding"] = [1.0, 0.0, 0.0, 0.0]
        path = tmp_path / "ragged.jsonl"
        write_jsonl(path, [row])
        with pytest.raises(IngestError) as exc:
            ingest(str(path))
        assert "dimension" in str(exc.value)

    def test_zero_vector_rejected(self, tmp_path):
        row = article_row()
        row["images"][0]["embedding"] = [0.0, 0.0, 0.0]
        path = tmp_path / "zero.jsonl"
        write_jsonl(path, [row])
        with pytest.raises(IngestError):
            ingest(str(path))

    def test_duplicate_article_id_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        write_jsonl(path, [article_row(), article_row()])
        with pytest.raises(IngestError) as exc:
            ingest(str(path))
        assert exc.value.line_no == 2
        assert "duplicate" in str(exc.value)

    def test_non_boolean_gold_rejected(self, tmp_path):
        row = article_row()
        row["images"][0]["gold"] = 1
        path = tmp_path / "goldint.jsonl"
        write_jsonl(path, [row])
        with pytest.raises(IngestError):
            ingest(str(path))

    def test_invalid_pool_cap(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("")
        with pytest.raises(InvalidInput):
            ingest(str(path), pool_cap=0)


class TestLabelsRoundtrip:
    def test_roundtrip_preserves_floats_exactly(self, tmp_path):
        rows = [
            {"id": "a1", "t_star": 1.0 / 3.0, "pi": [0.1, 0.2 + 1e-16, 0.3]},
            {"id": "a2", "error": "degenerate pool"},
            {"id": "a3", "t_star": 0.0, "pi": [1.0]},
        ]
        path = tmp_path / "labels.jsonl"
        write_labels(str(path), rows)
        loaded = read_labels(str(path))
        assert [art_id for art_id, _ in loaded] == ["a1", "a3"]
        first = loaded[0][1]
        assert isinstance(first, DppLabels)
        assert first.t_star == 1.0 / 3.0
        np.testing.assert_array_equal(first.pi, np.array([0.1, 0.2 + 1e-16, 0.3]))

    def test_write_is_deterministic(self, tmp_path):
        rows = [{"id": "a", "t_star": math.pi, "pi": [1.0 / 7.0]}]
        p1, p2 = tmp_path / "l1.jsonl", tmp_path / "l2.jsonl"
        write_labels(str(p1), rows)
        write_labels(str(p2), rows)
        assert p1.read_bytes() == p2.read_bytes()

    def test_invalid_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "t_star": "x", "pi": [0.5]}\n')
        with pytest.raises(IngestError):
            read_labels(str(path))
        path.write_text('{"id": "a", "t_star": 1.0, "pi": [1.5]}\n')
        with pytest.raises(IngestError):
            read_labels(str(path))


class TestSelectionsRoundtrip:
    def test_roundtrip(self, tmp_path):
        rows = [
            {"id": "a1", "rule": "topk", "image_ids": ["i2", "i0"],
             "probabilities": [0.9, 0.1, 0.95]},
            {"id": "a2", "rule": "threshold", "image_ids": [],
             "probabilities": [0.2]},
        ]
        path = tmp_path / "sel.jsonl"
        write_selections(str(path), rows)
        assert read_selections(str(path)) == rows

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "rule": "topk"}\n')
        with pytest.raises(IngestError):
            read_selections(str(path))


class TestArrayStorage:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        named = [
            ("w", rng.normal(size=(3, 4))),
            ("b", rng.normal(size=4)),
            ("s", np.asarray(math.pi)),
        ]
        path = tmp_path / "arrays.json"
        save_arrays(str(path), "student", {"note": 7}, named)
        meta, arrays = load_arrays(str(path), "student")
        assert meta == {"note": 7}
        for name, arr in named:
            assert arrays[name].shape == np.asarray(arr).shape
            np.testing.assert_array_equal(arrays[name], arr)

    def test_kind_mismatch_rejected(self, tmp_path):
        path = tmp_path / "arrays.json"
        save_arrays(str(path), "student", {}, [("w", np.zeros(2))])
        with pytest.raises(InvalidInput):
            load_arrays(str(path), "fusion")

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "arrays.json"
        save_arrays(str(path), "student", {}, [("w", np.zeros(2))])
        payload = json.loads(path.read_text())
        payload["version"] = ARRAY_VERSION + 1
        path.write_text(json.dumps(payload))
        with pytest.raises(InvalidInput):
            load_arrays(str(path), "student")

    def test_foreign_file_rejected(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(InvalidInput):
            load_arrays(str(path), "student")
        assert ARRAY_FORMAT == "dppselect-arrays"

    def test_extreme_floats_survive(self, tmp_path):
        values = np.array([5e-324, 1.7976931348623157e308, -0.0, 1e-17])
        path = tmp_path / "edge.json"
        save_arrays(str(path), "student", {}, [("v", values)])
        _, arrays = load_arrays(str(path), "student")
        np.testing.assert_array_equal(arrays["v"], values)
