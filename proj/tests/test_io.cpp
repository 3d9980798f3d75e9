#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "den/io.hpp"
#include "den/synth.hpp"
#include "test_util.hpp"

namespace {

den::Dataset sample_dataset() {
  den::SynthConfig cfg;
  cfg.n_groups = 2;
  cfg.ids_per_group = 2;
  cfg.samples_per_id = 3;
  cfg.dim = 3;
  cfg.group_error_means = {0.15, 0.35};
  cfg.seed = 9;
  return den::generate_synthetic_dataset(cfg);
}

void expect_equal_datasets(const den::Dataset& a, const den::Dataset& b) {
  REQUIRE(a.n == b.n);
  REQUIRE(a.dim == b.dim);
  REQUIRE(a.embeddings == b.embeddings);
  REQUIRE(a.errors == b.errors);
  REQUIRE(a.identity.has_value() == b.identity.has_value());
  if (a.identity) {
    REQUIRE(a.identity->codes == b.identity->codes);
    REQUIRE(a.identity->categories == b.identity->categories);
  }
  REQUIRE(a.groups.size() == b.groups.size());
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    REQUIRE(a.groups[g].first == b.groups[g].first);
    REQUIRE(a.groups[g].second.codes == b.groups[g].second.codes);
  }
}

}  // namespace

TEST_CASE("bundle round-trips through save and load") {
  const auto ds = sample_dataset();
  testutil::TempDir dir;

  SECTION("binary embeddings") {
    const auto manifest = den::save_bundle(dir.path(), ds, "sample");
    const auto loaded = den::load_bundle(manifest);
    expect_equal_datasets(ds, loaded.dataset);
    CHECK(loaded.digest.starts_with("fnv1a64:"));
  }

  SECTION("text embeddings") {
    den::SaveOptions opt;
    opt.embeddings_format = "csv";
    const auto manifest = den::save_bundle(dir.path(), ds, "sample", opt);
    const auto loaded = den::load_bundle(manifest);
    expect_equal_datasets(ds, loaded.dataset);
  }

  SECTION("text and binary formats load identical datasets") {
    den::SaveOptions csv_opt;
    csv_opt.embeddings_format = "csv";
    const auto bin = den::load_bundle(den::save_bundle(dir.path(), ds, "b"));
    const auto txt =
        den::load_bundle(den::save_bundle(dir.path(), ds, "t", csv_opt));
    expect_equal_datasets(bin.dataset, txt.dataset);
  }
}

TEST_CASE("tiny hand-written text bundle") {
  testutil::TempDir dir;
  const auto manifest_path = dir.path() / "tiny.json";
  {
    std::ofstream(dir.path() / "records.csv")
        << "index,error,identity,Male\n0,0.1,a,yes\n1,0.2,a,no\n2,0.3,b,no\n";
    std::ofstream(dir.path() / "emb.csv") << "0,0\n1,0\n3,0\n";
    std::ofstream(manifest_path)
        << R"({"den_bundle":1,"n":3,"d":2,"records":"records.csv",)"
        << R"("embeddings":"emb.csv","embeddings_format":"csv",)"
        << R"("identity":"identity","groups":["Male"]})";
  }
  const auto bundle = den::load_bundle(manifest_path);
  CHECK(bundle.dataset.n == 3);
  CHECK(bundle.dataset.errors == std::vector<double>{0.1, 0.2, 0.3});
  REQUIRE(bundle.dataset.identity.has_value());
  CHECK(bundle.dataset.identity->n_categories() == 2);
  REQUIRE(bundle.dataset.groups.size() == 1);
  CHECK(bundle.dataset.groups[0].first == "Male");
}

TEST_CASE("records with prediction and label columns") {
  testutil::TempDir dir;
  const auto manifest_path = dir.path() / "m.json";
  std::ofstream(dir.path() / "records.csv")
      << "index,prediction,label\n0,0.9,0\n1,0.2,0\n";
  std::ofstream(dir.path() / "emb.csv") << "0\n1\n";
  std::ofstream(manifest_path)
      << R"({"den_bundle":1,"n":2,"d":1,"records":"records.csv",)"
      << R"("embeddings":"emb.csv","embeddings_format":"csv","task":"binary"})";
  const auto bundle = den::load_bundle(manifest_path);
  CHECK(bundle.dataset.errors == std::vector<double>{1.0, 0.0});
}

TEST_CASE("load failures carry precise diagnostics") {
  testutil::TempDir dir;
  const auto ds = sample_dataset();
  const auto manifest = den::save_bundle(dir.path(), ds, "sample");

  SECTION("wrong binary magic names the magic") {
    auto bytes = den::detail::read_file_bytes(dir.path() / "sample_embeddings.denb");
    bytes[0] = 'X';
    den::detail::write_file_bytes(dir.path() / "sample_embeddings.denb", bytes);
    REQUIRE_THROWS_WITH(den::load_bundle(manifest),
                        Catch::Matchers::ContainsSubstring("DENB"));
  }

  SECTION("record row count mismatch names the counts") {
    auto text = den::detail::read_file_bytes(dir.path() / "sample_records.csv");
    text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop last row
    den::detail::write_file_bytes(dir.path() / "sample_records.csv", text);
    REQUIRE_THROWS_WITH(
        den::load_bundle(manifest),
        Catch::Matchers::ContainsSubstring("expected 12 record rows, got 11"));
  }

  SECTION("unparseable numeric field names file and row") {
    std::ofstream(dir.path() / "records.csv") << "index,error\n0,oops\n";
    std::ofstream(dir.path() / "emb.csv") << "0,0,0\n";
    std::ofstream(dir.path() / "bad.json")
        << R"({"den_bundle":1,"n":1,"d":3,"records":"records.csv",)"
        << R"("embeddings":"emb.csv","embeddings_format":"csv"})";
    REQUIRE_THROWS_WITH(den::load_bundle(dir.path() / "bad.json"),
                        Catch::Matchers::ContainsSubstring("row 2"));
  }

  SECTION("NaN error rejected by validation") {
    std::ofstream(dir.path() / "records.csv") << "index,error\n0,nan\n";
    std::ofstream(dir.path() / "emb.csv") << "0,0,0\n";
    std::ofstream(dir.path() / "nan.json")
        << R"({"den_bundle":1,"n":1,"d":3,"records":"records.csv",)"
        << R"("embeddings":"emb.csv","embeddings_format":"csv"})";
    REQUIRE_THROWS_AS(den::load_bundle(dir.path() / "nan.json"), den::DataError);
  }

  SECTION("missing column named in the error") {
    std::ofstream(dir.path() / "records.csv") << "index\n0\n";
    std::ofstream(dir.path() / "emb.csv") << "0,0,0\n";
    std::ofstream(dir.path() / "col.json")
        << R"({"den_bundle":1,"n":1,"d":3,"records":"records.csv",)"
        << R"("embeddings":"emb.csv","embeddings_format":"csv"})";
    REQUIRE_THROWS_WITH(den::load_bundle(dir.path() / "col.json"),
                        Catch::Matchers::ContainsSubstring("error"));
  }

  SECTION("out-of-order index column rejected") {
    std::ofstream(dir.path() / "records.csv") << "index,error\n1,0.1\n0,0.2\n";
    std::ofstream(dir.path() / "emb.csv") << "0\n1\n";
    std::ofstream(dir.path() / "ord.json")
        << R"({"den_bundle":1,"n":2,"d":1,"records":"records.csv",)"
        << R"("embeddings":"emb.csv","embeddings_format":"csv"})";
    REQUIRE_THROWS_WITH(den::load_bundle(dir.path() / "ord.json"),
                        Catch::Matchers::ContainsSubstring("out of order"));
  }
}

TEST_CASE("denb codec") {
  const std::vector<float> values = {1.5f, -2.25f, 0.0f, 3.75f, 100.125f, -0.5f};
  const auto bytes = den::encode_denb(values, 2, 3);
  REQUIRE(bytes.size() == 12 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "DENB");
  std::size_t n = 0, d = 0;
  const auto decoded = den::decode_denb(bytes, "mem", &n, &d);
  CHECK(n == 2);
  CHECK(d == 3);
  CHECK(decoded == values);

  SECTION("truncated payload rejected with sizes") {
    REQUIRE_THROWS_WITH(
        den::decode_denb(bytes.substr(0, bytes.size() - 4), "mem", &n, &d),
        Catch::Matchers::ContainsSubstring("bytes"));
  }
}

TEST_CASE("report json serialization is stable") {
  den::DenCurve curve;
  curve.size_kind = den::SizeKind::Knn;
  curve.metric = den::DisparityMetric::Rawlsian;
  curve.points = {{1.0, 0.8}, {4.0, 0.5}};
  curve.auc = den::curve_auc(curve.points);
  const auto j = den::curve_to_json(curve);
  CHECK(j["size_kind"] == "knn");
  CHECK(j["metric"] == "rawlsian");
  CHECK(j["points"].size() == 2);
  // identical inputs serialize to identical bytes
  CHECK(j.dump(2) == den::curve_to_json(curve).dump(2));

  const auto csv = den::curve_to_csv(curve);
  CHECK(csv == "size,disparity\n1,0.8\n4,0.5\n");
}
