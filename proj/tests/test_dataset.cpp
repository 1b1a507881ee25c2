#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "micromech/array_file.hpp"
#include "micromech/config_io.hpp"
#include "micromech/dataset.hpp"

using namespace micromech;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("micromech_test_" + name);
  fs::remove_all(p);
  return p;
}

DatasetConfig small_config(const fs::path& out) {
  DatasetConfig c;
  c.n_samples = 2;
  c.n_vof_groups = 2;
  c.resolution = 64;
  c.master_seed = 11;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(ArrayFile, HeaderBytes) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const auto bytes = encode_array(v, {2, 3});
  const std::string head = "{\"dtype\": \"f64\", \"shape\": [2, 3], \"order\": \"C\", \"byte_order\": \"LE\"}\n";
  ASSERT_EQ(bytes.substr(0, head.size()), head);
  EXPECT_EQ(bytes.size(), head.size() + 48);
  // 1.0 is 0x3FF0000000000000, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[head.size() + 7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[head.size() + 6]), 0xF0);
}

TEST(ArrayFile, RoundTrip) {
  const std::vector<double> v{-0.0, 1e-300, 3.5, -7.25};
  const auto d = decode_array(encode_array(v, {4}));
  EXPECT_EQ(d.header.dtype, DType::F64);
  EXPECT_EQ(d.header.shape, (std::vector<std::size_t>{4}));
  EXPECT_EQ(d.f64, v);
  const std::vector<std::uint8_t> u{0, 1, 1, 0, 1, 0};
  const auto e = decode_array(encode_array(u, {3, 2}));
  EXPECT_EQ(e.header.dtype, DType::U8);
  EXPECT_EQ(e.u8, u);
}

TEST(ArrayFile, RejectsMalformed) {
  const std::vector<double> v{1.0, 2.0};
  auto bytes = encode_array(v, {2});
  EXPECT_THROW(decode_array(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_array(bytes + "x"), FormatError);
  EXPECT_THROW(decode_array("not a header\n"), FormatError);
  EXPECT_THROW(parse_header(R"({"dtype": "f32", "shape": [1], "order": "C", "byte_order": "LE"})"), FormatError);
  EXPECT_THROW(parse_header(R"({"dtype": "f64", "shape": [1], "order": "F", "byte_order": "LE"})"), FormatError);
  EXPECT_THROW(parse_header(R"({"dtype": "f64", "shape": [1], "order": "C", "byte_order": "BE"})"), FormatError);
  EXPECT_THROW(parse_header(R"({"dtype": "f64", "shape": [1], "order": "C"})"), FormatError);
}

TEST(ArrayFile, GridShapes) {
  Grid<Voigt4> a(Shape{3, 2}, Voigt4::identity());
  a[4](1, 2) = 0.25;
  const auto p = scratch("grid") ;
  fs::create_directories(p);
  write_grid((p / "A.arr").string(), a);
  const auto d = read_array((p / "A.arr").string());
  EXPECT_EQ(d.header.shape, (std::vector<std::size_t>{3, 2, 3, 3}));
  EXPECT_EQ(to_voigt4_grid(d), a);
  EXPECT_THROW(to_phase_grid(d), FormatError);
  fs::remove_all(p);
}

TEST(ConfigIo, SolverRoundTripAndUnknownKeys) {
  SolverConfig c;
  c.tol = 1e-9;
  c.scheme = FreqScheme::Continuous;
  c.residual_freqs = ResidualFrequencies::Continuous;
  const auto back = solver_config_from_json(to_json(c));
  EXPECT_EQ(back.tol, c.tol);
  EXPECT_EQ(back.scheme, c.scheme);
  EXPECT_EQ(back.residual_freqs, c.residual_freqs);
  auto j = to_json(c);
  j["tolerance"] = 1.0;
  EXPECT_THROW(solver_config_from_json(j), ConfigError);
  EXPECT_THROW(solver_config_from_json(Json{{"scheme", "staggered"}}), ConfigError);
}

TEST(ConfigIo, DottedOverride) {
  Json j = to_json(DatasetConfig{});
  apply_override(j, "solver.tol=1e-8");
  apply_override(j, "output_dir=run_a");
  apply_override(j, "property_bounds.E_f=[10, 20]");
  const auto c = dataset_config_from_json(j);
  EXPECT_EQ(c.solver.tol, 1e-8);
  EXPECT_EQ(c.output_dir, "run_a");
  EXPECT_EQ(c.property_bounds.E_f, (Range{10, 20}));
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  apply_override(j, "bogus=1");
  EXPECT_THROW(dataset_config_from_json(j), ConfigError);
}

TEST(ConfigIo, HashIgnoresOutputDir) {
  DatasetConfig a, b;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.master_seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Lhs, OneSamplePerStratum) {
  const std::array<Range, 4> b{{{5, 85}, {0.05, 0.45}, {2.5, 5}, {0.3, 0.4}}};
  const int n = 37;
  const auto rows = lhs_sample(n, b, 123);
  ASSERT_EQ(rows.size(), 37u);
  for (std::size_t d = 0; d < 4; ++d) {
    std::set<int> strata;
    for (const auto& r : rows) {
      const double u = (r[d] - b[d].lo) / (b[d].hi - b[d].lo);
      ASSERT_GE(u, 0.0);
      ASSERT_LT(u, 1.0);
      strata.insert(static_cast<int>(u * n));
    }
    EXPECT_EQ(strata.size(), static_cast<std::size_t>(n)) << "column " << d;
  }
  EXPECT_EQ(lhs_sample(n, b, 123), rows);
  EXPECT_NE(lhs_sample(n, b, 124), rows);
}

TEST(Lhs, DegenerateRangeIsConstant) {
  const std::array<Range, 4> b{{{3, 3}, {0, 1}, {0, 1}, {0, 1}}};
  for (const auto& r : lhs_sample(5, b, 1)) EXPECT_EQ(r[0], 3.0);
  EXPECT_THROW(lhs_sample(0, b, 1), DomainError);
}

TEST(Stratify, EvenlySpacedBlocks) {
  const auto v = stratify_vof(40, {0.4, 0.6}, 20);
  ASSERT_EQ(v.size(), 40u);
  EXPECT_DOUBLE_EQ(v[0], 0.4);
  EXPECT_DOUBLE_EQ(v[1], 0.4);
  EXPECT_DOUBLE_EQ(v[2], 0.4 + 0.2 / 19);
  EXPECT_DOUBLE_EQ(v[39], 0.6);
  EXPECT_EQ(stratify_vof(3, {0.5, 0.5}, 1), (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_THROW(stratify_vof(10, {0.4, 0.6}, 3), DomainError);
}

TEST(Dataset, GeneratesValidSamples) {
  const auto out = scratch("gen");
  auto cfg = small_config(out);
  cfg.store_stiffness = true;
  const auto r = generate_dataset(cfg);
  ASSERT_EQ(r.n_failed(), 0);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto dir = out / sample_dir_name(i);
    EXPECT_EQ(read_array_header((dir / "rve.arr").string()).shape, (std::vector<std::size_t>{64, 64}));
    EXPECT_EQ(read_array_header((dir / "A.arr").string()).shape, (std::vector<std::size_t>{64, 64, 3, 3}));
    EXPECT_TRUE(fs::exists(dir / "C.arr"));
  }
  const auto rep = validate_dataset(out.string());
  EXPECT_TRUE(rep.ok()) << (rep.problems.empty() ? "" : rep.problems.front());
  EXPECT_EQ(rep.samples_checked, 2u);
  EXPECT_EQ(rep.files_checked, 6u);

  std::ifstream is(out / "manifest.json");
  const auto m = Json::parse(is);
  EXPECT_EQ(m["n_ok"], 2);
  EXPECT_EQ(m["config_hash"], config_hash(cfg));
  EXPECT_EQ(m["samples"][1]["vof_target"], 0.6);
  fs::remove_all(out);
}

TEST(Dataset, DeterministicAcrossThreadCounts) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  generate_dataset(small_config(a), 1);
  generate_dataset(small_config(b), 2);
  for (const char* rel : {"sample_00000/rve.arr", "sample_00000/A.arr", "sample_00001/A.arr", "manifest.json"}) {
    const auto x = read_file_bytes((a / rel).string());
    auto y = read_file_bytes((b / rel).string());
    if (std::string(rel) == "manifest.json") {
      // Only the output directory differs.
      auto jx = Json::parse(x), jy = Json::parse(y);
      jx["config"].erase("output_dir");
      jy["config"].erase("output_dir");
      EXPECT_EQ(jx, jy);
    } else {
      EXPECT_EQ(x, y) << rel;
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, ValidateFindsCorruption) {
  const auto out = scratch("corrupt");
  generate_dataset(small_config(out));
  // Truncate one payload and drop a stray file next to the samples.
  const auto a = (out / "sample_00001" / "A.arr").string();
  auto bytes = read_file_bytes(a);
  write_file_bytes(a, bytes.substr(0, bytes.size() - 8));
  std::ofstream(out / "sample_00000" / "extra.arr") << "junk";
  const auto rep = validate_dataset(out.string());
  EXPECT_FALSE(rep.ok());
  EXPECT_EQ(rep.problems.size(), 2u);
  fs::remove_all(out);
}

TEST(Dataset, FailedSampleRecorded) {
  const auto out = scratch("fail");
  auto cfg = small_config(out);
  cfg.solver.max_iter = 1;
  const auto r = generate_dataset(cfg);
  EXPECT_EQ(r.n_failed(), 2);
  EXPECT_FALSE(fs::exists(out / sample_dir_name(0)));
  std::ifstream is(out / "manifest.json");
  const auto m = Json::parse(is);
  EXPECT_EQ(m["samples"][0]["status"], "failed");
  EXPECT_TRUE(validate_dataset(out.string()).ok());
  fs::remove_all(out);
}

TEST(Dataset, ConfigValidation) {
  DatasetConfig c;
  c.n_samples = 21;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.resolution = 16;
  EXPECT_THROW(c.validate(), ConfigError);
}
