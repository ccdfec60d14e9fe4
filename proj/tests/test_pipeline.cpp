#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "lingame/dataset_io.hpp"
#include "lingame/pipeline.hpp"

using namespace lingame;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData(LINGAME_DATA_DIR);

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lingame_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

// Runs the CLI with the given arguments; stdout and stderr go to files.
int cli(const std::vector<std::string>& args, const fs::path& stdout_file,
        const fs::path& stderr_file, const std::string& env = "") {
  std::string cmd = env + " " + quote(LINGAME_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(stdout_file.string()) + " 2>" + quote(stderr_file.string());
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

PipelineConfig table_config(const fs::path& out) {
  PipelineConfig c;
  c.data_path = kData / "conditions.csv";
  c.rates_path = kData / "synthetic_rates.csv";
  c.output_dir = out;
  return c;
}

const std::vector<std::string> kArtifacts{"validation.json", "delta_s.json", "effects.json",
                                          "results.json",    "forest.svg",   "forest.txt"};

}  // namespace

TEST_CASE("run is byte-deterministic") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  std::ostringstream err;
  REQUIRE(run_pipeline(table_config(a), err) == exit_status::kOk);
  REQUIRE(run_pipeline(table_config(b), err) == exit_status::kOk);
  CHECK(err.str().empty());
  for (const auto& name : kArtifacts) {
    INFO(name);
    REQUIRE(fs::exists(a / name));
    CHECK(read_file(a / name) == read_file(b / name));
  }
}

TEST_CASE("run reports every forest-plot statistic") {
  const auto out = scratch("report");
  std::ostringstream err;
  REQUIRE(run_pipeline(table_config(out), err) == exit_status::kOk);
  const auto results = json::parse(read_file(out / "results.json"));
  REQUIRE(results.contains("meta"));
  for (const char* model : {"fixed", "random_dl", "random_reml"}) {
    INFO(model);
    const auto& m = results["meta"][model];
    for (const char* key : {"pooled", "se", "ci95", "z", "p", "tau2", "q", "i2", "df", "weights",
                            "heterogeneity_line"}) {
      CHECK(m.contains(key));
    }
    CHECK(m["df"] == 10);
    CHECK(m["weights"].size() == 11);
  }
  CHECK(results["effects"].size() == 12);
  CHECK(results["exclusions"] ==
        json::array({{{"study_id", "Ockenfels & Werner"}, {"reason", "DegenerateDesign"}}}));
  CHECK(results["config"]["sentiment_source"] == "dataset");
  CHECK(results["dataset_digest"].get<std::string>().size() == 16);

  const auto svg = read_file(out / "forest.svg");
  std::size_t rows = 0;
  for (auto pos = svg.find("<g class=\"study\">"); pos != std::string::npos;
       pos = svg.find("<g class=\"study\">", pos + 1)) {
    ++rows;
  }
  CHECK(rows == 11);
  CHECK(svg.find("excluded: Ockenfels &amp; Werner (degenerate design)") != std::string::npos);
  CHECK(svg.find("class=\"pooled\"") != std::string::npos);
  CHECK(svg.find("τ²=") != std::string::npos);

  const auto validation = json::parse(read_file(out / "validation.json"));
  CHECK(validation["conditions"].size() == 3);
  CHECK(validation["descriptives"]["s_zero"]["n"] == 58);
}

TEST_CASE("run refuses to overwrite its inputs") {
  const auto dir = scratch("overwrite");
  fs::copy_file(kData / "conditions.csv", dir / "effects.json");
  PipelineConfig c = table_config(dir);
  c.data_path = dir / "effects.json";
  std::ostringstream err;
  CHECK(run_pipeline(c, err) == exit_status::kInternal);
  CHECK(err.str().find("IoError") != std::string::npos);
  CHECK(read_file(dir / "effects.json") == read_file(kData / "conditions.csv"));
}

TEST_CASE("subcommands compose into run") {
  const auto dir = scratch("compose");
  const std::string data = (kData / "conditions.csv").string();
  const std::string rates = (kData / "synthetic_rates.csv").string();
  const auto o = dir / "stdout";
  const auto e = dir / "stderr";
  REQUIRE(cli({"run", "--data", data, "--rates", rates, "--out", (dir / "run").string()}, o, e) ==
          0);
  REQUIRE(cli({"delta-s", "--data", data, "--rates", rates, "--out",
               (dir / "delta_s.json").string()},
              o, e) == 0);
  REQUIRE(cli({"regress", "--input", (dir / "delta_s.json").string(), "--out",
               (dir / "effects.json").string()},
              o, e) == 0);
  REQUIRE(cli({"meta", "--input", (dir / "effects.json").string(), "--out",
               (dir / "results.json").string()},
              o, e) == 0);
  REQUIRE(cli({"forest", "--input", (dir / "effects.json").string(), "--out",
               (dir / "forest.svg").string(), "--text", (dir / "forest.txt").string()},
              o, e) == 0);
  for (const auto& name :
       {"delta_s.json", "effects.json", "results.json", "forest.svg", "forest.txt"}) {
    INFO(name);
    CHECK(read_file(dir / name) == read_file(dir / "run" / name));
  }

  REQUIRE(cli({"forest", "--input", (dir / "effects.json").string(), "--tau2", "reml", "--out",
               (dir / "reml.svg").string()},
              o, e) == 0);
  CHECK(read_file(dir / "reml.svg").find("(REML)") != std::string::npos);
  REQUIRE(cli({"meta", "--input", (dir / "effects.json").string(), "--model", "fixed"}, o, e) ==
          0);
  const auto fixed_only = json::parse(read_file(o));
  CHECK(fixed_only["meta"].size() == 1);
  CHECK(fixed_only["meta"].contains("fixed"));
}

TEST_CASE("validate subcommand") {
  const auto dir = scratch("validate");
  REQUIRE(cli({"validate", "--data", (kData / "conditions.csv").string(), "--rates",
               (kData / "synthetic_rates.csv").string()},
              dir / "o", dir / "e") == 0);
  const auto doc = json::parse(read_file(dir / "o"));
  CHECK(doc["conditions"].size() == 3);
  CHECK(doc["conditions"][0]["code"] == "MissingSentiment");
  CHECK(doc["descriptives"]["sd_divisor"] == "n-1");
}

TEST_CASE("too few conditions everywhere exits with a validation error") {
  const auto dir = scratch("too_few");
  std::string csv =
      "study_id,condition_id,label,country,s_zero,s_half,s_all,prosocial_rate,text_keep,text_half,"
      "text_all\n";
  for (const char* s : {"A", "B", "C"}) {
    for (int c = 0; c < 2; ++c) {
      csv += std::string(s) + ",c" + std::to_string(c) + ",,," + std::to_string(2 + c) +
             ",5,4,0.3,k,h,a\n";
    }
  }
  write_file(dir / "tiny.csv", csv);
  const int status = cli({"run", "--data", (dir / "tiny.csv").string(), "--out",
                          (dir / "out").string()},
                         dir / "o", dir / "e");
  CHECK(status == 2);
  const auto err = json::parse(read_file(dir / "e"));
  CHECK(err["error"]["exit_status"] == 2);
  CHECK(err["error"]["code"] == "NoIncludedStudies");
  const auto& ex = err["error"]["details"]["exclusions"];
  REQUIRE(ex.size() == 3);
  for (const auto& x : ex) CHECK(x["reason"] == "TooFewConditions");
  CHECK(fs::exists(dir / "out" / "validation.json"));
  CHECK_FALSE(fs::exists(dir / "out" / "forest.svg"));
}

TEST_CASE("live mode without credentials fails fast") {
  const auto dir = scratch("live");
  const int status = cli({"run", "--data", (kData / "conditions.csv").string(), "--mode", "live",
                          "--out", (dir / "out").string()},
                         dir / "o", dir / "e",
                         "env -u LINGAME_API_KEY LINGAME_API_URL=http://127.0.0.1:9");
  CHECK(status == 3);
  const auto err = json::parse(read_file(dir / "e"));
  CHECK(err["error"]["code"] == "ProviderFailure");
  CHECK(err["error"]["message"].get<std::string>().find("LINGAME_API_KEY") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));

  CHECK(cli({"elicit", "--data", (kData / "conditions.csv").string(), "--mode", "live", "--out",
             (dir / "e.csv").string()},
            dir / "o", dir / "e", "env -u LINGAME_API_KEY") == 3);
}

TEST_CASE("fixture elicitation reproduces the dataset") {
  const auto dir = scratch("fixture");
  const std::string data = (kData / "conditions.csv").string();
  CHECK(cli({"elicit", "--data", data, "--fixtures", data, "--population-mode", "count1000-usa",
             "--parallelism", "3", "--skip-failed", "--out", (dir / "elicited.csv").string()},
            dir / "o", dir / "e") == 0);
  CHECK(ingest(dir / "elicited.csv") == ingest(kData / "conditions.csv"));

  // Without --skip-failed the blank rows abort the run.
  CHECK(cli({"elicit", "--data", data, "--fixtures", data, "--population-mode", "count1000-usa",
             "--out", (dir / "strict.csv").string()},
            dir / "o", dir / "e") == 3);
  // Country modes need a country for every condition.
  CHECK(cli({"elicit", "--data", data, "--fixtures", data, "--skip-failed", "--out",
             (dir / "country.csv").string()},
            dir / "o", dir / "e") != 0);
  // Unsupported combination of population mode and session policy.
  CHECK(cli({"elicit", "--data", data, "--fixtures", data, "--population-mode", "count1000-usa",
             "--session-policy", "single-chat-per-study", "--out", (dir / "bad.csv").string()},
            dir / "o", dir / "e") == 2);

  PipelineConfig c = table_config(dir / "run");
  c.fixtures_path = kData / "conditions.csv";
  c.elicitation.population_mode = PopulationMode::Count1000USA;
  std::ostringstream err;
  REQUIRE(run_pipeline(c, err) == exit_status::kOk);
  const auto validation = json::parse(read_file(dir / "run" / "validation.json"));
  CHECK(validation["elicitation_failures"].size() == 3);
  const auto results = json::parse(read_file(dir / "run" / "results.json"));
  CHECK(results["config"]["sentiment_source"] == "fixture");
  const auto plain = scratch("fixture_plain");
  REQUIRE(run_pipeline(table_config(plain), err) == exit_status::kOk);
  CHECK(read_file(dir / "run" / "forest.svg") == read_file(plain / "forest.svg"));
}

TEST_CASE("simulate writes a trajectory CSV") {
  const auto dir = scratch("simulate");
  REQUIRE(cli({"simulate", "--x0", "0.5,0.5,0", "--sentiments", "2,1,5", "--lambda", "1",
               "--horizon", "1.0986122886681098", "--step", "0.01", "--every", "10"},
              dir / "o", dir / "e") == 0);
  std::istringstream in(read_file(dir / "o"));
  std::string line, last;
  std::getline(in, line);
  CHECK(line == "t,x_keep,x_half,x_all");
  int rows = 0;
  while (std::getline(in, line)) {
    last = line;
    ++rows;
  }
  CHECK(rows == 12);
  CHECK(last.rfind("1.098612,", 0) == 0);
  CHECK(std::abs(std::stod(last.substr(9)) - 0.75) <= 1e-4);

  CHECK(cli({"simulate", "--x0", "0.5,0.6,0"}, dir / "o", dir / "e") == 2);
  const auto err = json::parse(read_file(dir / "e"));
  CHECK(err["error"]["code"] == "InvalidInitialState");
}
