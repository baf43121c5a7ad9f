#include "joris/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace joris;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  cli::Sink sink;
  sink.out = &out;
  sink.err = &err;
  Run r;
  r.code = cli::run(args, sink);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("joris_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  fs::path path_;
};

json read_json(const std::string& path) { return json::parse(read_file(path)); }

// Subset of JSON Schema: type, required, properties, items, additionalProperties.
bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "null") return v.is_null();
  return false;
}

void validate(const json& v, const json& schema, const std::string& where, std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    bool ok = false;
    if (schema["type"].is_string()) {
      ok = type_matches(v, schema["type"]);
    } else {
      for (const auto& t : schema["type"]) ok |= type_matches(v, t);
    }
    if (!ok) {
      errors.push_back(where + ": wrong type");
      return;
    }
  }
  if (schema.contains("required"))
    for (const auto& k : schema["required"])
      if (!v.contains(k.get<std::string>())) errors.push_back(where + ": missing " + k.get<std::string>());
  if (v.is_object()) {
    for (const auto& [k, sub] : v.items()) {
      if (schema.contains("properties") && schema["properties"].contains(k))
        validate(sub, schema["properties"][k], where + "." + k, errors);
      else if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object())
        validate(sub, schema["additionalProperties"], where + "." + k, errors);
    }
  }
  if (v.is_array() && schema.contains("items"))
    for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], schema["items"], where + "[" + std::to_string(i) + "]", errors);
}

}  // namespace

TEST(CliWeights, GevreyPassesEveryCheck) {
  auto r = cli_run({"weights", "--sequence", "gevrey:1,0", "--check", "all"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  ASSERT_EQ(j["growth"].size(), 3u);
  for (const auto& g : j["growth"]) EXPECT_TRUE(g["holds"].get<bool>()) << g["condition"];
  EXPECT_TRUE(j["breakpoint_identity"]["holds"].get<bool>());
  EXPECT_EQ(j["verdict"]["pass"], true);
}

TEST(CliWeights, QGevreyFailsModerateGrowth) {
  auto r = cli_run({"weights", "--sequence", "qgevrey:1", "--check", "moderate-growth"});
  EXPECT_EQ(r.code, 3);
  auto j = json::parse(r.out);
  ASSERT_EQ(j["growth"].size(), 1u);
  EXPECT_EQ(j["growth"][0]["condition"], "moderate_growth");
  EXPECT_FALSE(j["growth"][0]["holds"].get<bool>());
  EXPECT_EQ(j["verdict"]["pass"], false);
}

TEST(CliWeights, AssociatedFunctionCsvIsMonotone) {
  auto r = cli_run({"weights", "--sequence", "gevrey:1,0", "--hm", "--tmin", "1e-6", "--tmax", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,h_M,log_h_M");
  double prev_t = 0, prev_h = -1, prev_log = -1e300;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double t = 0, h = 0, lh = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    ls >> t >> c1 >> h >> c2 >> lh;
    ASSERT_TRUE(ls) << line;
    EXPECT_GT(t, prev_t);
    EXPECT_GE(h, prev_h);
    EXPECT_GE(lh, prev_log);
    EXPECT_NEAR(lh, log_h(make_gevrey(1.0), t), 1e-12 * std::max(1.0, std::abs(lh)));
    prev_t = t, prev_h = h, prev_log = lh;
    ++rows;
  }
  EXPECT_EQ(rows, 200u);
  EXPECT_DOUBLE_EQ(prev_t, 10.0);
}

TEST(CliUsage, ErrorsExitTwo) {
  EXPECT_EQ(cli_run({"weights", "--sequence", "gevrey:x"}).code, 2);
  EXPECT_EQ(cli_run({"weights", "--sequence", "cauchy:1"}).code, 2);
  EXPECT_EQ(cli_run({"weights", "--sequence", "gevrey:1", "--check", "nonsense"}).code, 2);
  EXPECT_EQ(cli_run({"no-such-command"}).code, 2);
  EXPECT_EQ(cli_run({}).code, 2);
  EXPECT_EQ(cli_run({"joris-run", "--p", "2", "--q", "4", "--f", "identity"}).code, 2);
  EXPECT_EQ(cli_run({"joris-run", "--f", "unknown"}).code, 2);
  EXPECT_EQ(cli_run({"gallery", "--demo", "nothing"}).code, 2);
  EXPECT_EQ(cli_run({"cover", "--eps", "2"}).code, 2);
  EXPECT_EQ(cli_run({"--help"}).code, 0);
}

TEST(CliCover, ReportHasCentersAndPassingChecks) {
  TempDir dir;
  auto r = cli_run({"cover", "--eps", "0.5", "--out", dir / "cover.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = read_json(dir / "cover.json");
  EXPECT_DOUBLE_EQ(j["cover"]["epsilon"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["cover"]["radius"].get<double>(), 0.5 * 0.5 / 16);
  EXPECT_EQ(j["cover"]["centers"].size(), j["cover"]["count"].get<std::size_t>());
  for (const auto& c : j["cover"]["centers"]) {
    ASSERT_EQ(c.size(), 2u);
    EXPECT_LE(s_parameter(Complex(c[0].get<double>(), c[1].get<double>())), 0.5);
  }
  EXPECT_TRUE(j["check"]["covering"].get<bool>());
  EXPECT_TRUE(j["check"]["safety"].get<bool>());
}

TEST(CliDbar, DiskGoldenPasses) {
  auto r = cli_run({"dbar-selftest"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_GE(j["error_slope"].get<double>(), 1.0);
  ASSERT_EQ(j["rows"].size(), 3u);
  for (const auto& row : j["rows"]) EXPECT_LE(row["dbar_residual"].get<double>(), 5 * row["h"].get<double>());
}

TEST(CliDbar, DiskIndicatorHasExactArea) {
  auto g = make_centered_grid(1.2, 1.2, 1.0 / 40);
  auto w = cli::disk_indicator(g);
  Complex total = 0;
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i) total += w.at(i, j) * g.cell_area();
  EXPECT_NEAR(total.real(), std::numbers::pi, 1e-9);
}

TEST(CliFamily, BuildVerifyAndTamper) {
  TempDir dir;
  auto fam = dir / "fam";
  auto b = cli_run({"pm-build", "--f", "identity", "--depth", "3", "--dir", fam, "--out", dir / "build.json"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_json(dir / "build.json")["verdict"]["pass"], true);
  auto v = cli_run({"pm-verify", "--dir", fam, "--f", "identity"});
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_LE(json::parse(v.out)["stored_grid_difference"].get<double>(), 1e-12);
  // wrong target fails the interval check
  EXPECT_EQ(cli_run({"pm-verify", "--dir", fam, "--f", "square"}).code, 3);
  // a modified sample disagrees with the stored series
  auto g = read_binary(fam + "/rung_1.bin");
  g.at(g.grid().nx / 2, g.grid().ny / 2) += Complex(1e-3, 0);
  write_binary(g, fam + "/rung_1.bin");
  EXPECT_EQ(cli_run({"pm-verify", "--dir", fam}).code, 3);
  // a truncated file is a data error
  std::string bytes = read_file(fam + "/rung_1.bin");
  write_file_atomic(fam + "/rung_1.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(cli_run({"pm-verify", "--dir", fam}).code, 4);
  EXPECT_EQ(cli_run({"pm-verify", "--dir", dir / "missing"}).code, 4);
}

TEST(CliSelftest, DefaultRunPasses) {
  auto r = cli_run({"selftest"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  std::set<std::string> groups;
  for (const auto& c : j["checks"]) {
    EXPECT_TRUE(c["pass"].get<bool>()) << c["name"] << " " << c["detail"];
    groups.insert(c["group"]);
  }
  EXPECT_EQ(groups, (std::set<std::string>{"dbar", "weights", "joris", "geometry", "extension", "gallery"}));
}

TEST(CliSelftest, FilterSelectsOneGroup) {
  auto r = cli_run({"selftest", "--filter", "dbar"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  ASSERT_FALSE(j["checks"].empty());
  for (const auto& c : j["checks"]) EXPECT_EQ(c["group"], "dbar");
  EXPECT_EQ(cli_run({"selftest", "--filter", "nothing"}).code, 2);
}

TEST(CliSelftest, CorruptedGoldenFileExitsFour) {
  TempDir dir;
  std::string text = read_file(std::string(JORIS_DATA_DIR) + "/goldens.json");
  auto pos = text.find("\"j\": 20");
  ASSERT_NE(pos, std::string::npos);
  std::string edited = text;
  edited.replace(pos, 7, "\"j\": 21");
  write_file_atomic(dir / "edited.json", edited);
  EXPECT_EQ(cli_run({"selftest", "--goldens", dir / "edited.json"}).code, 4);
  write_file_atomic(dir / "truncated.json", text.substr(0, text.size() / 2));
  EXPECT_EQ(cli_run({"selftest", "--goldens", dir / "truncated.json"}).code, 4);
  EXPECT_EQ(cli_run({"selftest", "--goldens", dir / "absent.json"}).code, 4);
}

TEST(CliSelftest, WrongGoldenValueFailsTheCheck) {
  TempDir dir;
  auto j = read_json(std::string(JORIS_DATA_DIR) + "/goldens.json");
  j["cases"]["joris"]["frobenius"][0][2] = 7;
  j["checksum"] = cli::goldens_checksum(j["cases"]);
  write_file_atomic(dir / "g.json", j.dump());
  auto r = cli_run({"selftest", "--goldens", dir / "g.json", "--filter", "joris"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("frobenius"), std::string::npos);
}

TEST(CliManifest, ReportsReproduceFromTheirManifest) {
  TempDir dir;
  for (std::vector<std::string> args :
       {std::vector<std::string>{"weights", "--sequence", "gevrey:2,1", "--out", dir / "w.json"},
        std::vector<std::string>{"--seed", "7", "selftest", "--filter", "weights", "--out", dir / "s.json"},
        std::vector<std::string>{"cover", "--eps", "0.25", "--out", dir / "c.json"}}) {
    ASSERT_EQ(cli_run(args).code, 0);
    std::string path = args.back();
    auto man = read_json(path)["manifest"];
    EXPECT_EQ(man["argv"].get<std::vector<std::string>>(), args);
    EXPECT_EQ(man["version"], JORIS_VERSION);
    EXPECT_TRUE(man["precision"]["default_bits"].is_number_integer());
    auto r = cli_run({"rerun", "--report", path});
    EXPECT_EQ(r.code, 0) << path << r.out;
  }
  EXPECT_EQ(read_json(dir / "s.json")["manifest"]["seed"], 7);
  EXPECT_EQ(read_json(dir / "w.json")["manifest"]["sequences"][0]["spec"], "gevrey:2,1");
  // an edited report no longer matches
  auto j = read_json(dir / "w.json");
  j["sequence"] = "edited";
  write_file_atomic(dir / "w.json", cli::dump_report(j));
  EXPECT_EQ(cli_run({"rerun", "--report", dir / "w.json"}).code, 3);
}

TEST(CliFiles, WritesLeaveNoTemporaries) {
  TempDir dir;
  ASSERT_EQ(cli_run({"cover", "--eps", "1", "--out", dir / "c.json"}).code, 0);
  ASSERT_EQ(cli_run({"cover", "--eps", "0.5", "--out", dir / "c.json"}).code, 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir.path())) names.push_back(e.path().filename().string());
  EXPECT_EQ(names, std::vector<std::string>{"c.json"});
  EXPECT_DOUBLE_EQ(read_json(dir / "c.json")["cover"]["epsilon"].get<double>(), 0.5);
}

TEST(CliGallery, BlowupCertificatePasses) {
  auto r = cli_run({"gallery", "--demo", "blowup", "--sequence", "gevrey:1,0", "--p", "2", "--m", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto c = json::parse(r.out)["certificate"];
  EXPECT_EQ(c["pass"], true);
  EXPECT_EQ(c["precision_bits"], kGalleryPrecisionBits);
  EXPECT_EQ(c["witnesses"].size(), 6u);
}

TEST(CliGallery, EtaRejectsQuasianalyticTable) {
  EXPECT_EQ(cli_run({"gallery", "--demo", "eta", "--sequence", "table:1,1,1,1,1,1,1,1"}).code, 2);
}

TEST(CliJoris, IdentityRunPassesAndMatchesTheSchema) {
  TempDir dir;
  auto r = cli_run({"joris-run", "--p", "2", "--q", "3", "--f", "identity", "--sequence", "gevrey:1,0", "--out",
                    dir / "report.json", "--family-out", dir / "fam"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = read_json(dir / "report.json");
  auto schema = read_json(std::string(JORIS_DOCS_DIR) + "/joris_report.schema.json");
  std::vector<std::string> errors;
  validate(report, schema, "$", errors);
  EXPECT_TRUE(errors.empty()) << errors.front();
  EXPECT_EQ(report["per_rung"].size(), 4u);
  // the assembled family is an ordinary family for pm-verify
  auto v = cli_run({"pm-verify", "--dir", dir / "fam", "--f", "identity"});
  EXPECT_EQ(v.code, 0) << v.out;
}

TEST(CliJoris, SchemaValidatorRejectsMissingKeys) {
  auto schema = read_json(std::string(JORIS_DOCS_DIR) + "/joris_report.schema.json");
  std::vector<std::string> errors;
  validate(json{{"config", json::object()}, {"per_rung", json::array({json::object()})}}, schema, "$", errors);
  EXPECT_GE(errors.size(), 5u);
}

TEST(CliJoris, FileDefinedModels) {
  TempDir dir;
  write_file_atomic(dir / "models.json", R"({"fp": [0, 0, 1], "fq": [0, 0, 0, 1], "oracle": [0, 1]})");
  write_file_atomic(dir / "broken.json", R"({"fp": [0, 0, 1]})");
  EXPECT_EQ(cli_run({"joris-run", "--models", dir / "broken.json"}).code, 4);
  EXPECT_EQ(cli_run({"joris-run", "--models", dir / "absent.json"}).code, 4);
  auto m = cli::load_models(dir / "models.json");
  for (double x : {-0.7, 0.2, 0.9}) {
    EXPECT_DOUBLE_EQ(static_cast<double>(m.fp.value(x)), x * x);
    EXPECT_DOUBLE_EQ(static_cast<double>(m.fq.value(x)), x * x * x);
    EXPECT_DOUBLE_EQ(static_cast<double>(m.oracle.value(x)), x);
  }
}
