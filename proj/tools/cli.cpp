#include "cli.hpp"

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>

#include "CLI11.hpp"

#include "hrv/annotation.hpp"
#include "hrv/augmentation.hpp"
#include "hrv/classifier.hpp"
#include "hrv/corpus.hpp"
#include "hrv/datasets.hpp"
#include "hrv/error.hpp"
#include "hrv/evaluation.hpp"
#include "hrv/io.hpp"
#include "hrv/keywords.hpp"
#include "hrv/segmenter.hpp"
#include "hrv/text.hpp"
#include "hrv/training.hpp"

namespace hrv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config() {
  return json{
      {"seed", 42},
      {"paths", json::object()},
      {"outputs", json::object()},
      {"corpus",
       {{"window_begin", "2022-02-24"},
        {"window_end", "2022-09-11"},
        {"abbreviations", ""},
        {"include_outside_window", false}}},
      {"sample", {{"per_channel", 30}}},
      {"split", {{"ratio", 0.8}}},
      {"select", {{"side", ""}}},
      {"annotation", {{"a", ""}, {"b", ""}, {"adjudicator", ""}, {"prelabel", kPrelabelAnnotator}}},
      {"augmentation",
       {{"chains", "1,2,3,4,5"},
        {"backend", "fixture"},
        {"parallelism", 1},
        {"prompt", "P2"},
        {"n_total", 515},
        {"max_retries", 3},
        {"reject", ""}}},
      {"variant", {{"id", "D1"}, {"reported_size", nullptr}}},
      {"baseline", {{"k", 30}, {"stopwords", ""}, {"match", "token"}}},
      {"encoder", to_json(EncoderSpec{})},
      // n_freeze sized for the default two-block encoder.
      {"training", [] {
         TrainingConfig c;
         c.n_freeze = 1;
         return to_json(c);
       }()},
      {"cross_validation",
       {{"learning_rates", json::array({5e-5})},
        {"epochs", json::array({5})},
        {"class_weights", json::array({json::array({0.17, 0.83})})}}},
      {"predict", {{"allow_untrained", false}}},
      {"evaluate", {{"level", "sentence"}, {"model", ""}, {"variant", ""}}},
  };
}

namespace {

enum class Kind { text, real, integer, unsigned_integer, boolean, pair, reals, integers, pairs, list };

double to_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorKind::config, "'" + s + "' is not a number");
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorKind::config, "'" + s + "' is not an integer");
  return v;
}

json to_pair(const std::string& s) {
  const auto parts = text::split(s, ',');
  if (parts.size() != 2) throw Error(ErrorKind::config, "'" + s + "' is not a pair a,b");
  return json::array({to_real(std::string(text::trim(parts[0]))), to_real(std::string(text::trim(parts[1])))});
}

struct Binding {
  CLI::Option* option = nullptr;
  std::string pointer;
  Kind kind = Kind::text;
  std::string value;
  std::vector<std::string> values;
  bool flag = false;
};

class Bindings {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& pointer, Kind kind,
              const std::string& help) {
    auto& b = items_.emplace_back();
    b.pointer = pointer;
    b.kind = kind;
    if (kind == Kind::list) {
      b.option = app->add_option(name, b.values, help);
    } else if (kind == Kind::boolean) {
      b.option = app->add_flag(name, b.flag, help);
    } else {
      b.option = app->add_option(name, b.value, help);
    }
  }

  void apply(json& cfg) const {
    for (const auto& b : items_) {
      if (b.option->count() == 0) continue;
      cfg[json::json_pointer(b.pointer)] = convert(b);
    }
  }

 private:
  static json convert(const Binding& b) {
    switch (b.kind) {
      case Kind::text:
        return b.value;
      case Kind::real:
        return to_real(b.value);
      case Kind::integer:
        return to_integer(b.value);
      case Kind::unsigned_integer: {
        const auto v = to_integer(b.value);
        if (v < 0) throw Error(ErrorKind::config, "'" + b.value + "' must be non-negative");
        return static_cast<std::uint64_t>(v);
      }
      case Kind::boolean:
        return b.flag;
      case Kind::pair:
        return to_pair(b.value);
      case Kind::reals: {
        json out = json::array();
        for (const auto& p : text::split(b.value, ',')) out.push_back(to_real(std::string(text::trim(p))));
        return out;
      }
      case Kind::integers: {
        json out = json::array();
        for (const auto& p : text::split(b.value, ',')) out.push_back(to_integer(std::string(text::trim(p))));
        return out;
      }
      case Kind::pairs: {
        json out = json::array();
        for (const auto& p : text::split(b.value, ';')) out.push_back(to_pair(std::string(text::trim(p))));
        return out;
      }
      case Kind::list:
        return b.values;
    }
    return nullptr;
  }

  std::deque<Binding> items_;
};

struct Context {
  json cfg;
  std::string command;
  std::ostream& out;
  std::ostream& err;

  void log(std::string_view level, std::string_view event, json fields = json::object()) const {
    json rec{{"level", level}, {"command", command}, {"event", event}};
    for (auto& [k, v] : fields.items()) rec[k] = v;
    err << rec.dump() << "\n";
  }

  bool has(const std::string& pointer) const {
    const json::json_pointer p(pointer);
    if (!cfg.contains(p)) return false;
    const auto& v = cfg.at(p);
    return !v.is_null() && !(v.is_string() && v.get<std::string>().empty());
  }

  template <typename T>
  T get(const std::string& pointer) const {
    const json::json_pointer p(pointer);
    if (!cfg.contains(p)) throw Error(ErrorKind::config, "missing config value " + pointer);
    try {
      return cfg.at(p).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::config, "config value " + pointer + " has the wrong type");
    }
  }

  std::string path(const std::string& pointer) const {
    if (!has(pointer)) throw Error(ErrorKind::config, "missing path " + pointer);
    return get<std::string>(pointer);
  }

  // Writes a primary output plus the effective config snapshot next to it.
  void write(const std::string& pointer, std::string_view content) const {
    const fs::path target = path(pointer);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    io::write_file_atomic(target, content);
    io::write_file_atomic(fs::path(target.string() + ".config.json"), cfg.dump(2) + "\n");
    log("info", "wrote", {{"path", target.string()}});
  }
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<std::string> inputs;    // path pointers that must exist when set
  std::vector<std::string> required;  // pointers that must be set
  std::function<void(Context&)> run;
};

void validate_paths(const Context& ctx, const Command& cmd) {
  for (const auto& p : cmd.required) {
    if (!ctx.has(p)) throw Error(ErrorKind::config, "required value " + p + " is not set");
  }
  for (const auto& p : cmd.inputs) {
    if (!ctx.has(p)) continue;
    const json& v = ctx.cfg.at(json::json_pointer(p));
    std::vector<std::string> paths;
    if (v.is_array()) {
      paths = v.get<std::vector<std::string>>();
    } else {
      paths.push_back(v.get<std::string>());
    }
    for (const auto& f : paths) {
      if (!fs::exists(f)) throw Error(ErrorKind::io, "input " + p + " does not exist: " + f);
    }
  }
}

CorpusWindow window_of(const Context& ctx) {
  auto parse = [&](const std::string& pointer, bool end) {
    const auto s = ctx.get<std::string>(pointer);
    const auto t = parse_iso8601(s);
    if (!t) throw Error(ErrorKind::config, pointer + " is not an ISO-8601 date: " + s);
    // A bare date as the end bound covers the whole day.
    if (end && s.size() == 10) return *t + std::chrono::seconds(86399);
    return *t;
  };
  return {parse("/corpus/window_begin", false), parse("/corpus/window_end", true)};
}

IngestResult load_corpus(const Context& ctx, const std::string& pointer) {
  std::ifstream in(ctx.path(pointer));
  if (!in) throw Error(ErrorKind::io, "cannot open " + ctx.path(pointer));
  auto result = ingest_export(in, window_of(ctx));
  for (const auto& w : result.report.warnings) ctx.log("warning", "ingest", {{"message", w}});
  return result;
}

std::vector<Sentence> load_sentences(const Context& ctx, const std::string& pointer) {
  std::ifstream in(ctx.path(pointer));
  if (!in) throw Error(ErrorKind::io, "cannot open " + ctx.path(pointer));
  return read_sentences(in);
}

std::vector<AugmentationRecord> load_records(const Context& ctx, const std::string& pointer) {
  std::ifstream in(ctx.path(pointer));
  if (!in) throw Error(ErrorKind::io, "cannot open " + ctx.path(pointer));
  return read_augmentation_records(in);
}

std::vector<PredictionRecord> load_predictions(const Context& ctx, const std::string& pointer) {
  std::ifstream in(ctx.path(pointer));
  if (!in) throw Error(ErrorKind::io, "cannot open " + ctx.path(pointer));
  return read_predictions(in);
}

std::optional<DatasetSplit> load_split(const Context& ctx) {
  if (!ctx.has("/paths/split")) return std::nullopt;
  return read_split_manifest(io::read_file(ctx.path("/paths/split")));
}

// Restricts to one side of the split; `fallback` applies when no side is
// configured. Without a split manifest everything is kept.
std::vector<Sentence> select(const Context& ctx, std::vector<Sentence> all, const std::string& fallback) {
  const auto split = load_split(ctx);
  if (!split) return all;
  const std::string side = ctx.has("/select/side") ? ctx.get<std::string>("/select/side") : fallback;
  if (side == "all") return all;
  if (side == "train") return select_side(all, split->train_posts);
  if (side == "test") return select_side(all, split->test_posts);
  throw Error(ErrorKind::config, "side must be train, test or all, not '" + side + "'");
}

AbbreviationLexicon lexicon_of(const Context& ctx) {
  if (ctx.has("/corpus/abbreviations")) return AbbreviationLexicon::load(ctx.path("/corpus/abbreviations"));
  return AbbreviationLexicon::builtin();
}

Level level_of(const Context& ctx) {
  const auto s = ctx.get<std::string>("/evaluate/level");
  const auto level = parse_level(s);
  if (!level) throw Error(ErrorKind::config, "level must be sentence or post, not '" + s + "'");
  return *level;
}

MetricsReport score(const Context& ctx, std::span<const PredictionRecord> predictions,
                    std::span<const Sentence> gold, const std::string& model, const std::string& variant) {
  const Level level = level_of(ctx);
  const ConfusionCounts c =
      level == Level::sentence ? confusion(predictions, gold) : confusion(rollup_posts(predictions, gold));
  return metrics_report(c, level, model, variant);
}

DatasetVariant assemble_variant(const Context& ctx) {
  const auto variant_name = ctx.get<std::string>("/variant/id");
  const auto id = parse_variant(variant_name);
  if (!id) throw Error(ErrorKind::config, "unknown variant '" + variant_name + "'");
  const auto all = load_sentences(ctx, "/paths/sentences");
  const auto split = load_split(ctx);
  const auto base = split ? select_side(all, split->train_posts) : all;
  std::vector<AugmentationRecord> bt;
  std::vector<AugmentationRecord> llm;
  if (*id == VariantId::D2 || *id == VariantId::D4) {
    if (!ctx.has("/paths/bt")) throw Error(ErrorKind::config, variant_name + " needs back-translations (--bt)");
    bt = load_records(ctx, "/paths/bt");
  }
  if (*id == VariantId::D3 || *id == VariantId::D4) {
    if (!ctx.has("/paths/llm")) throw Error(ErrorKind::config, variant_name + " needs generated examples (--llm)");
    llm = load_records(ctx, "/paths/llm");
  }
  VariantInputs inputs;
  inputs.base = base;
  inputs.back_translations = bt;
  inputs.generated = llm;
  inputs.split = split ? &*split : nullptr;
  if (ctx.has("/variant/reported_size")) inputs.reported_size = ctx.get<std::int64_t>("/variant/reported_size");
  auto variant = build_variant(inputs, *id);
  for (const auto& n : variant.notes) ctx.log("warning", "variant_note", {{"note", n}});
  return variant;
}

json counts_json(const ConfusionCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

// Command bodies.

void cmd_ingest(Context& ctx) {
  Corpus corpus;
  IngestReport report;
  const auto window = window_of(ctx);
  for (const auto& path : ctx.get<std::vector<std::string>>("/paths/inputs")) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ingest, "cannot read export " + path);
    ingest_into(corpus, in, report, window);
  }
  for (const auto& w : report.warnings) ctx.log("warning", "ingest", {{"message", w}});
  if (corpus.empty()) throw Error(ErrorKind::empty_input, "no valid posts in the export");
  ctx.write("/outputs/output", write_corpus(corpus));
  ctx.out << json{{"lines", report.lines},
                  {"accepted", report.accepted},
                  {"rejected", report.rejected},
                  {"duplicates", report.duplicates},
                  {"outside_window", report.outside_window},
                  {"channels", corpus.channels().size()}}
                 .dump()
          << "\n";
}

void cmd_segment(Context& ctx) {
  const auto loaded = load_corpus(ctx, "/paths/corpus");
  const auto lexicon = lexicon_of(ctx);
  const bool include_outside = ctx.get<bool>("/corpus/include_outside_window");
  std::vector<Sentence> sentences;
  std::size_t skipped = 0;
  for (const auto& post : loaded.corpus.posts()) {
    if (post.outside_window && !include_outside) {
      ++skipped;
      continue;
    }
    auto s = segment_post(post, lexicon);
    sentences.insert(sentences.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  std::size_t labeled = 0;
  if (ctx.has("/paths/labels")) {
    std::map<SentenceKey, int> labels;
    for (const auto& s : load_sentences(ctx, "/paths/labels")) {
      if (s.label) labels[s.key()] = *s.label;
    }
    for (auto& s : sentences) {
      if (const auto it = labels.find(s.key()); it != labels.end()) {
        s.label = it->second;
        ++labeled;
      }
    }
    if (labeled != labels.size()) {
      ctx.log("warning", "labels", {{"message", std::to_string(labels.size() - labeled) +
                                                    " labels did not match any segmented sentence"}});
    }
  }
  ctx.write("/outputs/output", write_sentences(sentences));
  const auto stats = sentence_length_stats(sentences);
  ctx.out << json{{"posts", loaded.corpus.posts().size() - skipped},
                  {"skipped_outside_window", skipped},
                  {"sentences", sentences.size()},
                  {"labeled", labeled},
                  {"mean_words", stats.mean},
                  {"mode_words", stats.mode}}
                 .dump()
          << "\n";
}

void cmd_sample(Context& ctx) {
  const auto loaded = load_corpus(ctx, "/paths/corpus");
  const auto posts =
      sample_posts(loaded.corpus, ctx.get<int>("/sample/per_channel"), ctx.get<std::uint64_t>("/seed"));
  Corpus sampled;
  for (const auto& p : posts) sampled.add(p, loaded.corpus.find_channel(p.channel_id)->affiliation);
  ctx.write("/outputs/output", write_corpus(sampled));
  ctx.out << json{{"sampled", posts.size()}, {"channels", sampled.channels().size()}}.dump() << "\n";
}

void cmd_kappa(Context& ctx) {
  const auto records = import_annotations(io::read_file(ctx.path("/paths/annotations")));
  const auto r = annotator_agreement(records, ctx.get<std::string>("/annotation/a"),
                                     ctx.get<std::string>("/annotation/b"));
  const json j{{"n_items", r.n_items},
               {"observed_agreement", r.observed_agreement},
               {"chance_agreement", r.chance_agreement},
               {"kappa", r.kappa},
               {"degenerate", r.degenerate}};
  if (ctx.has("/outputs/output")) ctx.write("/outputs/output", j.dump(2) + "\n");
  ctx.out << j.dump() << "\n";
}

void cmd_adjudicate(Context& ctx) {
  const auto records = import_annotations(io::read_file(ctx.path("/paths/annotations")));
  const auto gold = adjudicate(records, ctx.get<std::string>("/annotation/adjudicator"),
                               ctx.get<std::string>("/annotation/prelabel"));
  ctx.write("/outputs/output", write_sentences(gold_sentences(gold)));
  if (ctx.has("/outputs/export")) ctx.write("/outputs/export", export_annotations(gold));
  const auto totals = gold_totals(gold);
  ctx.out << json{{"positive", totals.positive}, {"negative", totals.negative}, {"total", totals.total}}.dump()
          << "\n";
}

void cmd_split(Context& ctx) {
  const auto sentences = load_sentences(ctx, "/paths/sentences");
  const auto split =
      split_posts(std::span<const Sentence>(sentences), ctx.get<double>("/split/ratio"), ctx.get<std::uint64_t>("/seed"));
  ctx.write("/outputs/output", write_split_manifest(split));
  ctx.out << json{{"train_posts", split.train_posts.size()}, {"test_posts", split.test_posts.size()}}.dump() << "\n";
}

void cmd_augment_bt(Context& ctx) {
  const auto all = select(ctx, load_sentences(ctx, "/paths/sentences"), "train");
  std::vector<Sentence> positives;
  for (const auto& s : all) {
    if (s.label == 1 && s.source.kind == Source::Kind::original) positives.push_back(s);
  }
  if (positives.empty()) throw Error(ErrorKind::empty_input, "no positive sentences to back-translate");
  const auto chains = select_chains(default_chains(), ctx.get<std::string>("/augmentation/chains"));
  CampaignOptions options;
  options.parallelism = ctx.get<int>("/augmentation/parallelism");

  const auto backend_name = ctx.get<std::string>("/augmentation/backend");
  CampaignResult result;
  if (backend_name == "identity") {
    IdentityTranslator backend;
    result = run_bt_campaign(positives, chains, backend, options);
  } else if (backend_name == "fixture") {
    RecordedFixture backend(io::read_file(ctx.path("/paths/fixtures")));
    result = run_bt_campaign(positives, chains, backend, options);
  } else {
    throw Error(ErrorKind::config, "backend must be fixture or identity, not '" + backend_name + "'");
  }
  for (const auto& f : result.failures) {
    ctx.log("warning", "chain_failure",
            {{"origin", to_string(f.origin)}, {"chain", f.chain_id}, {"hop", f.hop}, {"message", f.message}});
  }
  ctx.write("/outputs/output", write_augmentation_records(result.records));
  ctx.out << json{{"positives", positives.size()},
                  {"chains", chains.size()},
                  {"records", result.records.size()},
                  {"failures", result.failures.size()}}
                 .dump()
          << "\n";
}

void cmd_augment_llm(Context& ctx) {
  RecordedFixture backend(io::read_file(ctx.path("/paths/fixtures")));
  const auto prompt = prompt_by_id(ctx.get<std::string>("/augmentation/prompt"));
  GenerationOptions options;
  options.max_retries = ctx.get<int>("/augmentation/max_retries");
  const auto result = generate_llm_examples(prompt, backend, ctx.get<int>("/augmentation/n_total"), options);
  for (const auto& w : result.warnings) ctx.log("warning", "generation", {{"message", w}});
  ctx.write("/outputs/output", write_augmentation_records(result.candidates));
  ctx.out << json{{"candidates", result.candidates.size()}, {"calls", result.calls}, {"refusals", result.refusals}}
                 .dump()
          << "\n";
}

void cmd_augment_review(Context& ctx) {
  const auto candidates = load_records(ctx, "/paths/candidates");
  std::set<std::size_t> rejections;
  for (const auto& part : text::split(ctx.get<std::string>("/augmentation/reject"), ',')) {
    const auto trimmed = std::string(text::trim(part));
    if (trimmed.empty()) continue;
    const auto v = to_integer(trimmed);
    if (v < 0) throw Error(ErrorKind::input, "rejection index must be non-negative: " + trimmed);
    rejections.insert(static_cast<std::size_t>(v));
  }
  auto reviewed = review_filter(candidates, rejections);
  std::size_t before = reviewed.size();
  if (ctx.has("/paths/sentences")) {
    const auto originals = load_sentences(ctx, "/paths/sentences");
    reviewed = dedup(reviewed, originals);
  }
  std::size_t accepted = 0;
  for (const auto& r : reviewed) accepted += r.accepted;
  ctx.write("/outputs/output", write_augmentation_records(reviewed));
  ctx.out << json{{"candidates", candidates.size()},
                  {"rejected", rejections.size()},
                  {"duplicates_dropped", before - reviewed.size()},
                  {"accepted", accepted}}
                 .dump()
          << "\n";
}

void cmd_build_variant(Context& ctx) {
  const auto variant = assemble_variant(ctx);
  ctx.write("/outputs/output", write_sentences(variant.examples));
  ctx.out << json{{"variant", to_string(variant.id)},
                  {"size", variant.examples.size()},
                  {"counts", variant.counts},
                  {"notes", variant.notes}}
                 .dump()
          << "\n";
}

void cmd_extract_keywords(Context& ctx) {
  const auto train = select(ctx, load_sentences(ctx, "/paths/sentences"), "train");
  std::vector<std::string> positives;
  for (const auto& s : train) {
    if (s.label == 1) positives.push_back(s.text);
  }
  if (positives.empty()) throw Error(ErrorKind::empty_input, "no positive sentences to extract keywords from");
  const auto stopwords = ctx.has("/baseline/stopwords") ? StopwordList::load(ctx.path("/baseline/stopwords"))
                                                        : StopwordList::builtin();
  KeywordOptions options;
  const int k = ctx.get<int>("/baseline/k");
  if (k < 1) throw Error(ErrorKind::config, "k must be at least 1");
  options.k = static_cast<std::size_t>(k);
  const auto profile = extract_keywords(positives, stopwords, options);
  for (const auto& w : profile.warnings) ctx.log("warning", "keywords", {{"message", w}});
  ctx.write("/outputs/output", write_profile(profile));
  ctx.out << json{{"keywords", profile.keywords.size()}, {"positives", positives.size()}}.dump() << "\n";
}

void cmd_baseline_eval(Context& ctx) {
  const auto profile = read_profile(io::read_file(ctx.path("/paths/profile")));
  const auto gold = select(ctx, load_sentences(ctx, "/paths/sentences"), "test");
  const auto match_name = ctx.get<std::string>("/baseline/match");
  MatchMode mode;
  if (match_name == "token") {
    mode = MatchMode::token;
  } else if (match_name == "substring") {
    mode = MatchMode::substring;
  } else {
    throw Error(ErrorKind::config, "match must be token or substring, not '" + match_name + "'");
  }
  std::vector<PredictionRecord> predictions;
  predictions.reserve(gold.size());
  for (const auto& s : gold) {
    PredictionRecord r;
    r.key = s.key();
    r.label = keyword_classify(s.text, profile, mode);
    r.prob_hrv = r.label;
    predictions.push_back(r);
  }
  const auto model = ctx.has("/evaluate/model") ? ctx.get<std::string>("/evaluate/model") : "keywords";
  const auto variant = ctx.has("/evaluate/variant") ? ctx.get<std::string>("/evaluate/variant") : "D1";
  const auto report = score(ctx, predictions, gold, model, variant);
  if (ctx.has("/outputs/predictions")) ctx.write("/outputs/predictions", write_predictions(predictions));
  ctx.write("/outputs/output", to_json(report).dump(2) + "\n");
  ctx.out << to_json(report).dump() << "\n";
}

std::vector<Sentence> training_examples(const Context& ctx, std::string& variant_name) {
  if (ctx.has("/paths/data")) {
    variant_name = ctx.get<std::string>("/variant/id");
    return load_sentences(ctx, "/paths/data");
  }
  auto variant = assemble_variant(ctx);
  variant_name = std::string(to_string(variant.id));
  return std::move(variant.examples);
}

void cmd_train(Context& ctx) {
  std::string variant_name;
  const auto examples = training_examples(ctx, variant_name);
  const auto spec = encoder_spec_from_json(ctx.cfg.at("encoder"));
  const auto config = training_config_from_json(ctx.cfg.at("training"));
  ClassifierModel model = build_classifier(spec, config);
  const auto report = train(model, examples, [&](int epoch, double loss) {
    ctx.log("info", "epoch", {{"epoch", epoch}, {"mean_loss", loss}});
  });
  if (report.truncated > 0) {
    ctx.log("warning", "truncated", {{"sentences", report.truncated}, {"max_seq_len", config.max_seq_len}});
  }
  const fs::path dir = ctx.path("/paths/model_dir");
  save_model(model, dir);
  const auto stats = class_stats(examples);
  const json run{{"variant", variant_name},
                 {"examples", stats.total},
                 {"positive", stats.positive},
                 {"by_source", stats.by_source},
                 {"steps", report.steps},
                 {"truncated", report.truncated},
                 {"epoch_loss", report.epoch_loss}};
  io::write_file_atomic(dir / "run.json", run.dump(2) + "\n");
  io::write_file_atomic(dir / "effective_config.json", ctx.cfg.dump(2) + "\n");
  ctx.log("info", "wrote", {{"path", dir.string()}});
  ctx.out << run.dump() << "\n";
}

void cmd_cross_validate(Context& ctx) {
  std::string variant_name;
  const auto examples = training_examples(ctx, variant_name);
  const auto spec = encoder_spec_from_json(ctx.cfg.at("encoder"));
  const auto base = training_config_from_json(ctx.cfg.at("training"));
  const auto lrs = ctx.get<std::vector<double>>("/cross_validation/learning_rates");
  const auto epochs = ctx.get<std::vector<int>>("/cross_validation/epochs");
  const auto weights = ctx.get<std::vector<std::vector<double>>>("/cross_validation/class_weights");
  std::vector<TrainingConfig> grid;
  for (double lr : lrs) {
    for (int e : epochs) {
      for (const auto& w : weights) {
        if (w.size() != 2) throw Error(ErrorKind::config, "class weight pairs need two values");
        TrainingConfig c = base;
        c.learning_rate = lr;
        c.epochs = e;
        c.class_weights = {w[0], w[1]};
        grid.push_back(c);
      }
    }
  }
  if (grid.empty()) throw Error(ErrorKind::config, "cross-validation grid is empty");
  const auto result = cross_validate(spec, examples, grid, base.k_folds);
  json scores = json::array();
  for (const auto& s : result.scores) {
    scores.push_back({{"learning_rate", s.config.learning_rate},
                      {"epochs", s.config.epochs},
                      {"class_weights", {s.config.class_weights.negative, s.config.class_weights.hrv}},
                      {"fold_f2", s.fold_f2},
                      {"mean_f2", s.mean_f2}});
    ctx.log("info", "grid_point", scores.back());
  }
  const json doc{{"variant", variant_name},
                 {"k", base.k_folds},
                 {"scores", scores},
                 {"best", result.best},
                 {"best_config", to_json(result.best_config())}};
  ctx.write("/outputs/output", doc.dump(2) + "\n");
  ctx.out << doc["best_config"].dump() << "\n";
}

void cmd_predict(Context& ctx) {
  const ClassifierModel model = load_model(ctx.path("/paths/model_dir"));
  const auto sentences = select(ctx, load_sentences(ctx, "/paths/sentences"), "test");
  PredictOptions options;
  options.allow_untrained = ctx.get<bool>("/predict/allow_untrained");
  const auto predictions = predict(model, sentences, options);
  std::size_t positive = 0;
  std::size_t truncated = 0;
  for (const auto& p : predictions) {
    positive += p.label;
    truncated += p.truncated;
  }
  if (truncated > 0) ctx.log("warning", "truncated", {{"sentences", truncated}});
  ctx.write("/outputs/output", write_predictions(predictions));
  ctx.out << json{{"sentences", predictions.size()}, {"positive", positive}}.dump() << "\n";
}

void cmd_evaluate(Context& ctx) {
  const auto predictions = load_predictions(ctx, "/paths/predictions");
  const auto all = load_sentences(ctx, "/paths/sentences");
  const auto gold = select(ctx, all, "test");
  std::string model = ctx.has("/evaluate/model") ? ctx.get<std::string>("/evaluate/model") : "";
  std::string variant = ctx.has("/evaluate/variant") ? ctx.get<std::string>("/evaluate/variant") : "";
  if (ctx.has("/paths/model_dir")) {
    const fs::path run_file = fs::path(ctx.path("/paths/model_dir")) / "run.json";
    if (fs::exists(run_file)) {
      const json run = json::parse(io::read_file(run_file), nullptr, false);
      if (variant.empty() && run.is_object()) variant = run.value("variant", "");
    }
    if (model.empty()) model = fs::path(ctx.path("/paths/model_dir")).filename().string();
  }
  const auto report = score(ctx, predictions, gold, model, variant);
  ctx.write("/outputs/output", to_json(report).dump(2) + "\n");
  if (ctx.has("/outputs/flagged")) ctx.write("/outputs/flagged", write_flagged_posts(predictions, gold));
  json summary = to_json(report);
  if (report.counts) summary["counts"] = counts_json(*report.counts);
  ctx.out << summary.dump() << "\n";
}

void cmd_report(Context& ctx) {
  std::vector<MetricsReport> runs;
  for (const auto& path : ctx.get<std::vector<std::string>>("/paths/metrics")) {
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::schema, path + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& item : j) runs.push_back(metrics_report_from_json(item));
    } else {
      runs.push_back(metrics_report_from_json(j));
    }
  }
  const auto rep = performance_report(runs);
  ctx.write("/outputs/csv", rep.csv);
  if (ctx.has("/outputs/table")) ctx.write("/outputs/table", rep.table);
  ctx.out << rep.table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human-rights-violation sentence detection pipeline", "hrv"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (default: $" + std::string(kConfigEnv) + ")");

  Bindings b;
  std::vector<Command> commands;
  auto add = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    auto& c = commands.emplace_back();
    c.name = name;
    c.app = parent->add_subcommand(name.substr(name.rfind(' ') + 1), help);
    return &c;
  };
  auto output = [&](Command* c, const std::string& help = "output file") {
    b.option(c->app, "-o,--output", "/outputs/output", Kind::text, help);
    c->required.push_back("/outputs/output");
  };
  auto sentences = [&](Command* c, bool required) {
    b.option(c->app, "--sentences", "/paths/sentences", Kind::text, "sentence file (JSONL)");
    c->inputs.push_back("/paths/sentences");
    if (required) c->required.push_back("/paths/sentences");
  };
  auto split_side = [&](Command* c) {
    b.option(c->app, "--split", "/paths/split", Kind::text, "split manifest");
    b.option(c->app, "--side", "/select/side", Kind::text, "train, test or all");
    c->inputs.push_back("/paths/split");
  };
  auto window = [&](Command* c) {
    b.option(c->app, "--window-begin", "/corpus/window_begin", Kind::text, "first date of the collection window");
    b.option(c->app, "--window-end", "/corpus/window_end", Kind::text, "last date of the collection window");
  };
  auto variant_inputs = [&](Command* c) {
    split_side(c);
    b.option(c->app, "--bt", "/paths/bt", Kind::text, "back-translation records");
    b.option(c->app, "--llm", "/paths/llm", Kind::text, "reviewed generated records");
    b.option(c->app, "--variant", "/variant/id", Kind::text, "D1, D2, D3 or D4");
    c->inputs.insert(c->inputs.end(), {"/paths/bt", "/paths/llm"});
  };
  auto training_flags = [&](Command* c) {
    sentences(c, false);
    variant_inputs(c);
    b.option(c->app, "--data", "/paths/data", Kind::text, "pre-built training set (sentence file)");
    b.option(c->app, "--lr", "/training/learning_rate", Kind::real, "learning rate");
    b.option(c->app, "--epochs", "/training/epochs", Kind::integer, "epochs");
    b.option(c->app, "--freeze", "/training/n_freeze", Kind::integer, "frozen blocks (plus embeddings)");
    b.option(c->app, "--weights", "/training/class_weights", Kind::pair, "class weights neg,hrv");
    b.option(c->app, "--batch-size", "/training/batch_size", Kind::integer, "mini-batch size");
    b.option(c->app, "--max-seq-len", "/training/max_seq_len", Kind::integer, "token limit per sentence");
    b.option(c->app, "--seed", "/training/seed", Kind::unsigned_integer, "training seed");
    b.option(c->app, "--k", "/training/k_folds", Kind::integer, "number of folds");
    b.option(c->app, "--encoder", "/encoder/name", Kind::text, "encoder name");
    b.option(c->app, "--blocks", "/encoder/n_blocks", Kind::integer, "encoder blocks");
    b.option(c->app, "--hidden", "/encoder/hidden_size", Kind::integer, "encoder hidden size");
    b.option(c->app, "--heads", "/encoder/n_heads", Kind::integer, "attention heads");
    c->inputs.push_back("/paths/data");
  };

  {
    auto* c = add(&app, "ingest", "Parse channel exports into a corpus file");
    b.option(c->app, "-i,--input", "/paths/inputs", Kind::list, "export file(s)");
    window(c);
    output(c, "corpus file");
    c->inputs.push_back("/paths/inputs");
    c->required.push_back("/paths/inputs");
    c->run = cmd_ingest;
  }
  {
    auto* c = add(&app, "segment", "Split corpus posts into sentences");
    b.option(c->app, "--corpus", "/paths/corpus", Kind::text, "corpus file");
    b.option(c->app, "--abbreviations", "/corpus/abbreviations", Kind::text, "abbreviation lexicon");
    b.option(c->app, "--labels", "/paths/labels", Kind::text, "sentence file whose labels are joined by key");
    b.option(c->app, "--include-outside-window", "/corpus/include_outside_window", Kind::boolean,
             "keep posts dated outside the window");
    window(c);
    output(c, "sentence file");
    c->inputs.insert(c->inputs.end(), {"/paths/corpus", "/corpus/abbreviations", "/paths/labels"});
    c->required.push_back("/paths/corpus");
    c->run = cmd_segment;
  }
  {
    auto* c = add(&app, "sample", "Draw posts per channel for annotation");
    b.option(c->app, "--corpus", "/paths/corpus", Kind::text, "corpus file");
    b.option(c->app, "--per-channel", "/sample/per_channel", Kind::integer, "posts per channel");
    b.option(c->app, "--seed", "/seed", Kind::unsigned_integer, "sampling seed");
    window(c);
    output(c, "sampled corpus file");
    c->inputs.push_back("/paths/corpus");
    c->required.push_back("/paths/corpus");
    c->run = cmd_sample;
  }
  {
    auto* c = add(&app, "kappa", "Cohen's kappa between two annotators");
    b.option(c->app, "--annotations", "/paths/annotations", Kind::text, "annotation export (JSON)");
    b.option(c->app, "--a", "/annotation/a", Kind::text, "first annotator id");
    b.option(c->app, "--b", "/annotation/b", Kind::text, "second annotator id");
    b.option(c->app, "-o,--output", "/outputs/output", Kind::text, "report file");
    c->inputs.push_back("/paths/annotations");
    c->required.insert(c->required.end(), {"/paths/annotations", "/annotation/a", "/annotation/b"});
    c->run = cmd_kappa;
  }
  {
    auto* c = add(&app, "adjudicate", "Resolve disagreements into gold labels");
    b.option(c->app, "--annotations", "/paths/annotations", Kind::text, "annotation export (JSON)");
    b.option(c->app, "--adjudicator", "/annotation/adjudicator", Kind::text, "adjudicator id");
    b.option(c->app, "--prelabel", "/annotation/prelabel", Kind::text, "pre-label annotator id");
    b.option(c->app, "--export", "/outputs/export", Kind::text, "annotation export with gold fields");
    output(c, "gold sentence file");
    c->inputs.push_back("/paths/annotations");
    c->required.insert(c->required.end(), {"/paths/annotations", "/annotation/adjudicator"});
    c->run = cmd_adjudicate;
  }
  {
    auto* c = add(&app, "split", "Post-level train/test split");
    sentences(c, true);
    b.option(c->app, "--ratio", "/split/ratio", Kind::real, "train fraction");
    b.option(c->app, "--seed", "/seed", Kind::unsigned_integer, "split seed");
    output(c, "split manifest");
    c->run = cmd_split;
  }
  {
    auto* augment = app.add_subcommand("augment", "Data augmentation");
    augment->require_subcommand(1);
    {
      auto* c = add(augment, "augment bt", "Back-translate train-side positives");
      sentences(c, true);
      split_side(c);
      b.option(c->app, "--chains", "/augmentation/chains", Kind::text, "chain ids, e.g. 1,2,3,4,5");
      b.option(c->app, "--backend", "/augmentation/backend", Kind::text, "fixture or identity");
      b.option(c->app, "--fixtures", "/paths/fixtures", Kind::text, "recorded fixture file");
      b.option(c->app, "--parallelism", "/augmentation/parallelism", Kind::integer, "concurrent requests");
      output(c, "back-translation records");
      c->inputs.push_back("/paths/fixtures");
      c->run = cmd_augment_bt;
    }
    {
      auto* c = add(augment, "augment llm", "Generate synthetic positives");
      b.option(c->app, "--fixtures", "/paths/fixtures", Kind::text, "recorded fixture file");
      b.option(c->app, "--prompt", "/augmentation/prompt", Kind::text, "P1 or P2");
      b.option(c->app, "--n", "/augmentation/n_total", Kind::integer, "candidates to collect");
      b.option(c->app, "--max-retries", "/augmentation/max_retries", Kind::integer, "consecutive refusals tolerated");
      output(c, "candidate records");
      c->inputs.push_back("/paths/fixtures");
      c->required.push_back("/paths/fixtures");
      c->run = cmd_augment_llm;
    }
    {
      auto* c = add(augment, "augment review", "Apply manual rejections to candidates");
      b.option(c->app, "--candidates", "/paths/candidates", Kind::text, "candidate records");
      b.option(c->app, "--reject", "/augmentation/reject", Kind::text, "rejected candidate indices, e.g. 3,17");
      sentences(c, false);
      output(c, "reviewed records");
      c->inputs.push_back("/paths/candidates");
      c->required.push_back("/paths/candidates");
      c->run = cmd_augment_review;
    }
  }
  {
    auto* c = add(&app, "build-variant", "Assemble a training set variant");
    sentences(c, true);
    variant_inputs(c);
    b.option(c->app, "--reported-size", "/variant/reported_size", Kind::integer, "externally reported size");
    output(c, "variant sentence file");
    c->run = cmd_build_variant;
  }
  {
    auto* c = add(&app, "extract-keywords", "Keyword profile from train-side positives");
    sentences(c, true);
    split_side(c);
    b.option(c->app, "--k", "/baseline/k", Kind::integer, "number of keywords");
    b.option(c->app, "--stopwords", "/baseline/stopwords", Kind::text, "stopword list");
    output(c, "profile file");
    c->inputs.push_back("/baseline/stopwords");
    c->run = cmd_extract_keywords;
  }
  {
    auto* c = add(&app, "baseline-eval", "Evaluate the keyword baseline");
    b.option(c->app, "--profile", "/paths/profile", Kind::text, "keyword profile");
    sentences(c, true);
    split_side(c);
    b.option(c->app, "--match", "/baseline/match", Kind::text, "token or substring");
    b.option(c->app, "--level", "/evaluate/level", Kind::text, "sentence or post");
    b.option(c->app, "--model", "/evaluate/model", Kind::text, "model name in the report");
    b.option(c->app, "--variant", "/evaluate/variant", Kind::text, "variant name in the report");
    b.option(c->app, "--predictions", "/outputs/predictions", Kind::text, "also write predictions here");
    output(c, "metrics file");
    c->inputs.push_back("/paths/profile");
    c->required.push_back("/paths/profile");
    c->run = cmd_baseline_eval;
  }
  {
    auto* c = add(&app, "train", "Fine-tune a classifier");
    training_flags(c);
    b.option(c->app, "--model-dir", "/paths/model_dir", Kind::text, "output model directory");
    c->required.push_back("/paths/model_dir");
    c->run = cmd_train;
  }
  {
    auto* c = add(&app, "cross-validate", "k-fold grid search");
    training_flags(c);
    b.option(c->app, "--grid-lr", "/cross_validation/learning_rates", Kind::reals, "learning rates, comma separated");
    b.option(c->app, "--grid-epochs", "/cross_validation/epochs", Kind::integers, "epoch counts, comma separated");
    b.option(c->app, "--grid-weights", "/cross_validation/class_weights", Kind::pairs,
             "weight pairs, e.g. 0.5,0.5;0.17,0.83");
    output(c, "cross-validation report");
    c->run = cmd_cross_validate;
  }
  {
    auto* c = add(&app, "predict", "Sentence predictions from a trained model");
    b.option(c->app, "--model-dir", "/paths/model_dir", Kind::text, "model directory");
    sentences(c, true);
    split_side(c);
    b.option(c->app, "--allow-untrained", "/predict/allow_untrained", Kind::boolean, "predict with an untrained model");
    output(c, "prediction file");
    c->inputs.push_back("/paths/model_dir");
    c->required.push_back("/paths/model_dir");
    c->run = cmd_predict;
  }
  {
    auto* c = add(&app, "evaluate", "Score predictions against gold labels");
    b.option(c->app, "--predictions", "/paths/predictions", Kind::text, "prediction file");
    sentences(c, true);
    split_side(c);
    b.option(c->app, "--level", "/evaluate/level", Kind::text, "sentence or post");
    b.option(c->app, "--model", "/evaluate/model", Kind::text, "model name in the report");
    b.option(c->app, "--variant", "/evaluate/variant", Kind::text, "variant name in the report");
    b.option(c->app, "--model-dir", "/paths/model_dir", Kind::text, "model directory (for run metadata)");
    b.option(c->app, "--flagged", "/outputs/flagged", Kind::text, "flagged-post file for review");
    output(c, "metrics file");
    c->inputs.insert(c->inputs.end(), {"/paths/predictions", "/paths/model_dir"});
    c->required.push_back("/paths/predictions");
    c->run = cmd_evaluate;
  }
  {
    auto* c = add(&app, "report", "Performance table across runs");
    b.option(c->app, "--metrics", "/paths/metrics", Kind::list, "metrics files");
    b.option(c->app, "--csv", "/outputs/csv", Kind::text, "comma-separated output");
    b.option(c->app, "--table", "/outputs/table", Kind::text, "aligned table output");
    c->inputs.push_back("/paths/metrics");
    c->required.insert(c->required.end(), {"/paths/metrics", "/outputs/csv"});
    c->run = cmd_report;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"level", "error"}, {"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  if (chosen == nullptr) {
    err << json{{"level", "error"}, {"error", "usage"}, {"message", "no command given"}}.dump() << "\n";
    return 2;
  }

  Context ctx{default_config(), chosen->name, out, err};
  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env != nullptr) config_path = env;
    }
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw Error(ErrorKind::io, "config file does not exist: " + config_path);
      json file;
      try {
        file = json::parse(io::read_file(config_path));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::config, config_path + ": " + e.what());
      }
      if (!file.is_object()) throw Error(ErrorKind::config, config_path + ": expected a JSON object");
      ctx.cfg.merge_patch(file);
    }
    b.apply(ctx.cfg);
    // Reject bad module configs before any stage runs.
    const auto spec = encoder_spec_from_json(ctx.cfg.at("encoder"));
    training_config_from_json(ctx.cfg.at("training")).validate_for(spec);
    validate_paths(ctx, *chosen);
    chosen->run(ctx);
  } catch (const Error& e) {
    err << json{{"level", "error"}, {"command", chosen->name}, {"error", to_string(e.kind())}, {"message", e.what()}}
               .dump()
        << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"level", "error"}, {"command", chosen->name}, {"error", "internal"}, {"message", e.what()}}.dump()
        << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hrv::cli
