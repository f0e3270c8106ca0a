#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "hrv/corpus.hpp"
#include "hrv/io.hpp"
#include "json.hpp"
#include "support/synthetic.hpp"

using namespace hrv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result hrv_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hrv_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json last_line(const std::string& s) {
  const auto trimmed = s.substr(0, s.find_last_not_of('\n') + 1);
  return json::parse(trimmed.substr(trimmed.rfind('\n') == std::string::npos ? 0 : trimmed.rfind('\n') + 1));
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(hrv_run({}).code == 2);
  CHECK(hrv_run({"bogus"}).code == 2);
  CHECK(hrv_run({"split", "--ratio"}).code == 2);
  const auto help = hrv_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("cross-validate") != std::string::npos);
}

TEST_CASE("stage errors exit 1 with a structured record") {
  const auto dir = scratch("errors");
  auto r = hrv_run({"split", "--sentences", (dir / "missing.jsonl").string(), "-o", (dir / "s.json").string()});
  CHECK(r.code == 1);
  auto rec = last_line(r.err);
  CHECK(rec["level"] == "error");
  CHECK(rec["command"] == "split");
  CHECK(rec["error"] == "io");

  r = hrv_run({"split", "-o", (dir / "s.json").string()});
  CHECK(r.code == 1);
  CHECK(last_line(r.err)["error"] == "config");

  io::write_file_atomic(dir / "bad.json", "{\"training\": {\"epochs\": 0}}");
  const auto synth = testing::make_synthetic_corpus(4, 2, 0.5, 1);
  io::write_file_atomic(dir / "s.jsonl", write_sentences(synth.gold));
  r = hrv_run({"--config", (dir / "bad.json").string(), "split", "--sentences", (dir / "s.jsonl").string(), "-o",
               (dir / "m.json").string()});
  CHECK(r.code == 1);
  CHECK(last_line(r.err)["error"] == "config");
}

TEST_CASE("config file, then flags") {
  const auto dir = scratch("precedence");
  const auto synth = testing::make_synthetic_corpus(20, 2, 0.5, 1);
  io::write_file_atomic(dir / "s.jsonl", write_sentences(synth.gold));
  io::write_file_atomic(dir / "cfg.json", R"({"split": {"ratio": 0.5}})");
  auto r = hrv_run({"--config", (dir / "cfg.json").string(), "split", "--sentences", (dir / "s.jsonl").string(),
                    "-o", (dir / "a.json").string()});
  REQUIRE(r.code == 0);
  CHECK(last_line(r.out)["train_posts"] == 10);
  r = hrv_run({"--config", (dir / "cfg.json").string(), "split", "--sentences", (dir / "s.jsonl").string(),
               "--ratio", "0.75", "-o", (dir / "b.json").string()});
  REQUIRE(r.code == 0);
  CHECK(last_line(r.out)["train_posts"] == 15);
  const auto effective = json::parse(io::read_file(dir / "b.json.config.json"));
  CHECK(effective["split"]["ratio"] == 0.75);
}

TEST_CASE("split is reproducible") {
  const auto dir = scratch("split");
  const auto synth = testing::make_synthetic_corpus(30, 2, 0.5, 3);
  io::write_file_atomic(dir / "s.jsonl", write_sentences(synth.gold));
  for (const char* name : {"a.json", "b.json"}) {
    REQUIRE(hrv_run({"split", "--sentences", (dir / "s.jsonl").string(), "--seed", "11", "-o",
                     (dir / name).string()})
                .code == 0);
  }
  CHECK(io::read_file(dir / "a.json") == io::read_file(dir / "b.json"));
}

TEST_CASE("end-to-end pipeline") {
  const auto dir = scratch("pipeline");
  const auto synth = testing::make_synthetic_corpus(30, 4, 0.3, 5);
  io::write_file_atomic(dir / "export.jsonl", synth.export_jsonl);
  io::write_file_atomic(dir / "gold.jsonl", write_sentences(synth.gold));
  auto p = [&](const char* f) { return (dir / f).string(); };

  auto r = hrv_run({"ingest", "-i", p("export.jsonl"), "-o", p("corpus.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = hrv_run({"segment", "--corpus", p("corpus.jsonl"), "--labels", p("gold.jsonl"), "-o", p("sentences.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = hrv_run({"split", "--sentences", p("sentences.jsonl"), "-o", p("split.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = hrv_run({"train", "--sentences", p("sentences.jsonl"), "--split", p("split.json"), "--hidden", "16",
               "--epochs", "4", "--lr", "0.005", "--freeze", "0", "--batch-size", "8", "--max-seq-len", "32",
               "--model-dir", p("model")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "model" / "weights.bin"));
  CHECK(fs::exists(dir / "model" / "effective_config.json"));
  CHECK(json::parse(io::read_file(dir / "model" / "run.json"))["variant"] == "D1");

  r = hrv_run({"predict", "--model-dir", p("model"), "--sentences", p("sentences.jsonl"), "--split",
               p("split.json"), "-o", p("pred.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = hrv_run({"evaluate", "--predictions", p("pred.jsonl"), "--sentences", p("sentences.jsonl"), "--split",
               p("split.json"), "--level", "post", "--model-dir", p("model"), "--flagged", p("flagged.jsonl"), "-o",
               p("metrics.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto metrics = json::parse(io::read_file(dir / "metrics.json"));
  CHECK(metrics["level"] == "post");
  CHECK(metrics["variant"] == "D1");
  CHECK(metrics["model"] == "model");

  r = hrv_run({"report", "--metrics", p("metrics.json"), "--csv", p("report.csv"), "--table", p("report.txt")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = io::read_file(dir / "report.csv");
  CHECK(csv.rfind("model,variant,level,P,R,F1,F2\n", 0) == 0);
  CHECK(csv.find("model,D1,post,") != std::string::npos);

  // Evaluating training-side predictions against test-side gold fails alignment.
  r = hrv_run({"evaluate", "--predictions", p("pred.jsonl"), "--sentences", p("sentences.jsonl"), "--split",
               p("split.json"), "--side", "train", "-o", p("bad.json")});
  CHECK(r.code == 1);
  CHECK(last_line(r.err)["error"] == "alignment");
}

TEST_CASE("keyword baseline through the cli") {
  const auto dir = scratch("baseline");
  const auto synth = testing::make_synthetic_corpus(30, 3, 0.3, 8);
  io::write_file_atomic(dir / "s.jsonl", write_sentences(synth.gold));
  auto p = [&](const char* f) { return (dir / f).string(); };
  REQUIRE(hrv_run({"split", "--sentences", p("s.jsonl"), "-o", p("split.json")}).code == 0);
  auto r = hrv_run({"extract-keywords", "--sentences", p("s.jsonl"), "--split", p("split.json"), "--k", "10", "-o",
                    p("profile.tsv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = hrv_run({"baseline-eval", "--profile", p("profile.tsv"), "--sentences", p("s.jsonl"), "--split",
               p("split.json"), "-o", p("m.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto m = json::parse(io::read_file(dir / "m.json"));
  CHECK(m["model"] == "keywords");
  CHECK(m["recall"].get<double>() > 0.5);
}
