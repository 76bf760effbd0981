#include "divscope/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "divscope/errors.hpp"
#include "divscope/netan.hpp"
#include "divscope/panel.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/digest.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/rng.hpp"
#include "divscope/util/stats.hpp"

#include "json.hpp"

namespace divscope::pipeline {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(util::read_text(path));
  } catch (const DataError&) {
    throw ConfigError("cannot read config file: " + path.string());
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  cfg.config_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    if (j.contains("inputs")) {
      const auto& in = j["inputs"];
      auto get_path = [&](const char* key) -> std::filesystem::path {
        if (!in.contains(key)) return {};
        return resolve(cfg.config_dir, in[key].get<std::string>());
      };
      cfg.articles = get_path("articles");
      cfg.overrides = get_path("overrides");
      cfg.stopwords = get_path("stopwords");
      cfg.doc_topic = get_path("doc_topic");
      cfg.topic_words = get_path("topic_words");
      cfg.vectors = get_path("vectors");
    }
    for (const auto& c : j.value("categories", json::array())) {
      CategoryConfig cc;
      cc.id = c.at("id").get<std::string>();
      cc.factor = c.value("factor", 1.0);
      cc.parent = c.value("parent", std::string());
      cfg.categories.push_back(std::move(cc));
    }
    if (j.contains("text")) {
      cfg.pmi_min_pair_count = j["text"].value("pmi_min_pair_count", cfg.pmi_min_pair_count);
      cfg.pmi_threshold = j["text"].value("pmi_threshold", cfg.pmi_threshold);
    }
    if (j.contains("expansion")) {
      const auto& e = j["expansion"];
      cfg.salience_min_count = e.value("salience_min_count", cfg.salience_min_count);
      cfg.salient_top = e.value("salient_top", cfg.salient_top);
      cfg.neighbor_top = e.value("neighbor_top", cfg.neighbor_top);
      cfg.min_similarity = e.value("min_similarity", cfg.min_similarity);
      cfg.aggregation = e.value("aggregation", cfg.aggregation);
    }
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      cfg.embedding_mode = e.value("mode", cfg.embedding_mode);
      cfg.embed_window = e.value("window", cfg.embed_window);
      cfg.embed_dims = e.value("dims", cfg.embed_dims);
      cfg.embed_min_term_count = e.value("min_term_count", cfg.embed_min_term_count);
    }
    if (j.contains("topics")) {
      const auto& t = j["topics"];
      cfg.presence_threshold = t.value("presence_threshold", cfg.presence_threshold);
      cfg.max_prevalence = t.value("max_prevalence", cfg.max_prevalence);
      cfg.min_topic_words = t.value("min_words", cfg.min_topic_words);
      cfg.renormalize = t.value("renormalize", cfg.renormalize);
    }
    if (j.contains("diversity")) {
      const auto& d = j["diversity"];
      cfg.linkage = d.value("linkage", cfg.linkage);
      if (d.contains("fractions")) cfg.fractions = d["fractions"].get<std::vector<double>>();
      if (d.contains("years")) cfg.years = d["years"].get<std::array<int, 2>>();
    }
    if (j.contains("comparison")) {
      const auto& c = j["comparison"];
      cfg.comparison_enabled = c.value("enabled", cfg.comparison_enabled);
      if (c.contains("kinds")) cfg.comparison_kinds = c["kinds"].get<std::vector<std::string>>();
      cfg.comparison_min_year = c.value("min_year", cfg.comparison_min_year);
      cfg.sample_n = c.value("sample_n", cfg.sample_n);
      cfg.sample_runs = c.value("runs", cfg.sample_runs);
    }
    if (j.contains("network") && j["network"].contains("windows")) {
      cfg.network_windows = j["network"]["windows"].get<std::vector<std::array<int, 2>>>();
    }
    if (j.contains("panel")) {
      const auto& p = j["panel"];
      cfg.panel_min_papers = p.value("min_papers", cfg.panel_min_papers);
      if (p.contains("years")) cfg.panel_years = p["years"].get<std::array<int, 2>>();
      cfg.panel_response = p.value("response", cfg.panel_response);
      cfg.panel_report_family = p.value("report_family", cfg.panel_report_family);
      cfg.panel_report_paramset = p.value("report_paramset", cfg.panel_report_paramset);
    }
    if (j.contains("report")) {
      cfg.smoothing_window = j["report"].value("smoothing_window", cfg.smoothing_window);
    }
    if (!j.contains("seed")) throw ConfigError("config: seed is mandatory");
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.threads = j.value("threads", 1u);
    if (j.contains("out_dir")) {
      cfg.out_dir = resolve(cfg.config_dir, j["out_dir"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  check(!(cfg.presence_threshold < 0.0) && cfg.presence_threshold < 1.0,
        "presence_threshold must lie in [0,1)");
  check(cfg.max_prevalence > 0.0 && cfg.max_prevalence <= 1.0,
        "max_prevalence must lie in (0,1]");
  check(cfg.min_similarity >= -1.0 && cfg.min_similarity <= 1.0,
        "min_similarity must lie in [-1,1]");
  check(cfg.embed_dims >= 1, "embedding dims must be at least 1");
  check(cfg.embed_window >= 1, "embedding window must be at least 1");
  check(cfg.aggregation == "max" || cfg.aggregation == "mean",
        "aggregation must be max or mean");
  check(cfg.embedding_mode == "builtin" || cfg.embedding_mode == "external",
        "embedding mode must be builtin or external");
  check(cfg.linkage == "single" || cfg.linkage == "complete" || cfg.linkage == "average",
        "linkage must be single, complete or average");
  check(cfg.panel_response == "z" || cfg.panel_response == "raw",
        "panel response must be z or raw");
  check(cfg.smoothing_window >= 1, "smoothing_window must be at least 1");
  check(cfg.sample_runs >= 1, "comparison runs must be at least 1");
  for (const auto& f : cfg.fractions) {
    check(f > 0.0 && f <= 1.0, "fractions must lie in (0,1]");
  }
  for (const auto& k : cfg.comparison_kinds) {
    corpus::parse_org_kind(k);  // any string maps, but keep the hook for typos
  }
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Expand: return "expand";
    case Stage::Topics: return "topics";
    case Stage::Diversity: return "diversity";
    case Stage::Network: return "network";
    case Stage::Panel: return "panel";
    case Stage::Report: return "report";
  }
  return "unknown";
}

namespace {

struct Manifest {
  std::string stage;
  std::string version;
  std::uint64_t seed = 0;
  std::string config_key;
  std::map<std::string, std::string> outputs;  // filename -> digest
  ordered_json stats;
};

std::filesystem::path stage_dir(const RunConfig& cfg, Stage stage) {
  return cfg.out_dir / std::string(stage_name(stage));
}

std::optional<Manifest> read_manifest(const std::filesystem::path& dir) {
  auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) return std::nullopt;
  json j = json::parse(util::read_text(path), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  Manifest m;
  m.stage = j.value("stage", std::string());
  m.version = j.value("version", std::string());
  m.seed = j.value("seed", std::uint64_t{0});
  m.config_key = j.value("config_key", std::string());
  if (j.contains("outputs")) {
    for (const auto& [k, v] : j["outputs"].items()) m.outputs[k] = v.get<std::string>();
  }
  if (j.contains("stats")) m.stats = j["stats"];
  return m;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  ordered_json j;
  j["stage"] = m.stage;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config_key"] = m.config_key;
  ordered_json outputs;
  for (const auto& [k, v] : m.outputs) outputs[k] = v;
  j["outputs"] = std::move(outputs);
  j["stats"] = m.stats;
  util::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::string input_digest(const std::filesystem::path& path, const char* what) {
  if (path.empty()) return "absent";
  try {
    return util::digest_file(path);
  } catch (const DataError&) {
    throw DataError(std::string(what) + ": cannot read input " + path.string());
  }
}

// Stage keys: canonical JSON of the parameters a stage depends on plus the
// keys of its upstream stages. Threads and out_dir never contribute.
std::string key_ingest(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "ingest";
  j["version"] = std::string(kVersion);
  j["articles"] = input_digest(cfg.articles, "ingest");
  j["overrides"] = cfg.overrides.empty() ? "absent" : input_digest(cfg.overrides, "ingest");
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_expand(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "expand";
  j["upstream"] = key_ingest(cfg);
  j["stopwords"] = input_digest(cfg.stopwords, "expand");
  j["pmi_min_pair_count"] = cfg.pmi_min_pair_count;
  j["pmi_threshold"] = cfg.pmi_threshold;
  j["salience_min_count"] = cfg.salience_min_count;
  j["salient_top"] = cfg.salient_top;
  j["neighbor_top"] = cfg.neighbor_top;
  j["min_similarity"] = cfg.min_similarity;
  j["aggregation"] = cfg.aggregation;
  j["embedding_mode"] = cfg.embedding_mode;
  j["embed_window"] = cfg.embed_window;
  j["embed_dims"] = cfg.embed_dims;
  j["embed_min_term_count"] = cfg.embed_min_term_count;
  j["vectors"] = cfg.embedding_mode == "external" ? input_digest(cfg.vectors, "expand")
                                                  : "builtin";
  j["seed"] = cfg.seed;
  auto cats = ordered_json::array();
  for (const auto& c : cfg.categories) {
    ordered_json cj;
    cj["id"] = c.id;
    cj["factor"] = c.factor;
    cj["parent"] = c.parent;
    cats.push_back(std::move(cj));
  }
  j["categories"] = std::move(cats);
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_topics(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "topics";
  j["upstream"] = key_expand(cfg);
  j["doc_topic"] = input_digest(cfg.doc_topic, "topics");
  j["topic_words"] = input_digest(cfg.topic_words, "topics");
  j["presence_threshold"] = cfg.presence_threshold;
  j["max_prevalence"] = cfg.max_prevalence;
  j["min_topic_words"] = cfg.min_topic_words;
  j["renormalize"] = cfg.renormalize;
  j["comparison_enabled"] = cfg.comparison_enabled;
  j["comparison_kinds"] = cfg.comparison_kinds;
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_diversity(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "diversity";
  j["upstream"] = key_topics(cfg);
  j["linkage"] = cfg.linkage;
  j["fractions"] = cfg.fractions;
  if (cfg.years) j["years"] = *cfg.years;
  j["comparison_enabled"] = cfg.comparison_enabled;
  j["comparison_kinds"] = cfg.comparison_kinds;
  j["comparison_min_year"] = cfg.comparison_min_year;
  j["sample_n"] = cfg.sample_n;
  j["sample_runs"] = cfg.sample_runs;
  j["seed"] = cfg.seed;
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_network(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "network";
  j["upstream"] = key_topics(cfg);
  j["windows"] = cfg.network_windows;
  j["fractions"] = cfg.fractions;
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_panel(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "panel";
  j["upstream"] = key_topics(cfg);
  j["min_papers"] = cfg.panel_min_papers;
  if (cfg.panel_years) j["years"] = *cfg.panel_years;
  j["response"] = cfg.panel_response;
  j["report_family"] = cfg.panel_report_family;
  j["report_paramset"] = cfg.panel_report_paramset;
  j["linkage"] = cfg.linkage;
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string key_report(const RunConfig& cfg) {
  ordered_json j;
  j["stage"] = "report";
  j["smoothing_window"] = cfg.smoothing_window;
  auto upstream = ordered_json::array();
  for (Stage s : {Stage::Ingest, Stage::Expand, Stage::Topics, Stage::Diversity,
                  Stage::Network, Stage::Panel}) {
    auto m = read_manifest(stage_dir(cfg, s));
    upstream.push_back(m ? m->config_key : "absent");
  }
  j["upstream"] = std::move(upstream);
  return util::to_hex(util::fnv1a64(j.dump()));
}

std::string stage_key(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::Ingest: return key_ingest(cfg);
    case Stage::Expand: return key_expand(cfg);
    case Stage::Topics: return key_topics(cfg);
    case Stage::Diversity: return key_diversity(cfg);
    case Stage::Network: return key_network(cfg);
    case Stage::Panel: return key_panel(cfg);
    case Stage::Report: return key_report(cfg);
  }
  throw ConfigError("unknown stage");
}

void require_stage(const RunConfig& cfg, Stage stage) {
  auto m = read_manifest(stage_dir(cfg, stage));
  if (!m) {
    throw DataError(std::string("stage '") + std::string(stage_name(stage)) +
                    "' has not produced artifacts yet; run it first");
  }
}

// ---- shared loaders -------------------------------------------------------

corpus::Corpus load_stage_corpus(const RunConfig& cfg) {
  require_stage(cfg, Stage::Ingest);
  corpus::Corpus c =
      corpus::load_articles(stage_dir(cfg, Stage::Ingest) / "corpus.jsonl", nullptr, cfg.threads);
  return c;
}

struct ModelBundle {
  corpus::Corpus corpus;
  std::vector<std::string> field_ids;
  topics::TopicModel model;
  topics::PresenceMatrix presence;
  topics::ModelDiagnostics diagnostics;
  topics::FilterOutcome filter;
};

ModelBundle load_model_bundle(const RunConfig& cfg) {
  ModelBundle b;
  b.corpus = load_stage_corpus(cfg);
  require_stage(cfg, Stage::Expand);
  auto field = corpus::CorpusSlice::from_ids(
      b.corpus, "field corpus",
      expand::read_id_file(stage_dir(cfg, Stage::Expand) / "field_corpus.ids"));
  b.field_ids = std::move(field.ids);
  topics::TopicModel raw = topics::load_topic_model(cfg.doc_topic, cfg.topic_words, b.corpus,
                                                    &b.diagnostics, b.field_ids, cfg.threads);
  b.filter = topics::filter_topics(raw, cfg.max_prevalence, cfg.min_topic_words,
                                   cfg.presence_threshold, cfg.renormalize);
  b.model = std::move(b.filter.model);
  b.presence = topics::binarize(b.model, cfg.presence_threshold);
  return b;
}

diversity::MetricOptions metric_options(const RunConfig& cfg) {
  diversity::MetricOptions opt;
  if (cfg.linkage == "single") opt.linkage = diversity::Linkage::Single;
  else if (cfg.linkage == "complete") opt.linkage = diversity::Linkage::Complete;
  else opt.linkage = diversity::Linkage::Average;
  return opt;
}

std::vector<corpus::YearWindow> yearly_windows(const RunConfig& cfg,
                                               const topics::TopicModel& model) {
  int lo, hi;
  if (cfg.years) {
    lo = (*cfg.years)[0];
    hi = (*cfg.years)[1];
  } else {
    if (model.years.empty()) throw DataError("model covers no articles");
    lo = *std::min_element(model.years.begin(), model.years.end());
    hi = *std::max_element(model.years.begin(), model.years.end());
  }
  std::vector<corpus::YearWindow> windows;
  for (int y = lo; y <= hi; ++y) windows.push_back({y, y});
  return windows;
}

std::vector<bool> comparison_mask(const RunConfig& cfg, const ModelBundle& b) {
  std::set<corpus::OrgKind> kinds;
  for (const auto& k : cfg.comparison_kinds) kinds.insert(corpus::parse_org_kind(k));
  std::vector<bool> mask(b.model.n_articles(), false);
  for (std::size_t r = 0; r < b.model.n_articles(); ++r) {
    const corpus::Article* a = b.corpus.find(b.model.article_ids[r]);
    if (!a) continue;
    for (const auto& org : a->orgs) {
      if (kinds.count(org.kind)) {
        mask[r] = true;
        break;
      }
    }
  }
  return mask;
}

// ---- stage bodies ---------------------------------------------------------

Manifest produce_ingest(const RunConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.articles.empty()) throw DataError("ingest: no articles input configured");
  corpus::LoadReport report;
  corpus::Corpus corpus = corpus::load_articles(cfg.articles, &report, cfg.threads);
  corpus::dedup_org_names(corpus);
  std::vector<std::string> warnings;
  if (!cfg.overrides.empty()) {
    auto directives = corpus::load_overrides(cfg.overrides);
    corpus::apply_overrides(corpus, directives, &warnings);
  }
  corpus::write_canonical_jsonl(dir / "corpus.jsonl", corpus);

  auto [lo, hi] = corpus::year_range(corpus);
  std::vector<corpus::YearWindow> windows;
  for (int y = lo; y <= hi; ++y) windows.push_back({y, y});
  windows.push_back({lo, hi});
  corpus::write_share_csv(dir / "shares_by_kind.csv",
                          corpus::participation_shares(corpus, corpus::Grouping::ByKind, windows));
  corpus::write_share_csv(dir / "shares_by_name.csv",
                          corpus::participation_shares(corpus, corpus::Grouping::ByName, windows));

  Manifest m;
  m.stats["articles"] = corpus.size();
  m.stats["rejected"] = report.rejected.size();
  m.stats["empty_abstracts"] = report.empty_abstracts;
  m.stats["override_warnings"] = warnings.size();
  m.stats["year_range"] = {lo, hi};
  for (const auto& f : {"corpus.jsonl", "shares_by_kind.csv", "shares_by_name.csv"}) {
    m.outputs[f] = util::digest_file(dir / f);
  }
  return m;
}

Manifest produce_expand(const RunConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.categories.empty()) throw ConfigError("expand: no core categories configured");
  if (cfg.stopwords.empty()) throw ConfigError("expand: no stopword file configured");
  corpus::Corpus corpus = load_stage_corpus(cfg);
  auto stopwords = text::load_stopwords(cfg.stopwords);
  text::CollocationConfig colloc{cfg.pmi_min_pair_count, cfg.pmi_threshold};
  auto streams = text::preprocess_corpus(corpus, stopwords, colloc, cfg.threads);

  embed::EmbeddingTable table;
  if (cfg.embedding_mode == "external") {
    if (cfg.vectors.empty()) throw ConfigError("expand: external embedding mode needs vectors");
    table = embed::load_vectors(cfg.vectors);
  } else {
    embed::PpmiSvdConfig pc;
    pc.window = cfg.embed_window;
    pc.dims = cfg.embed_dims;
    pc.min_term_count = cfg.embed_min_term_count;
    pc.seed = util::derive_seed(cfg.seed, 1);
    table = embed::train_ppmi_svd(streams, pc, cfg.threads);
    embed::save_vectors(dir / "embeddings.txt", table);
  }

  // Parent tables per archive, category tables per core category.
  std::map<std::string, text::TermTable> parents;
  for (const auto& cat : cfg.categories) {
    if (parents.count(cat.parent)) continue;
    std::vector<text::TokenStream> subset;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus.articles()[i].in_archive(cat.parent)) subset.push_back(streams[i]);
    }
    parents[cat.parent] = text::build_term_table(subset, cat.parent, cfg.threads);
  }

  expand::ExpansionParams params;
  params.salience_min_count = cfg.salience_min_count;
  params.salient_top = cfg.salient_top;
  params.neighbor_top = cfg.neighbor_top;
  params.min_similarity = cfg.min_similarity;
  params.aggregation = cfg.aggregation == "mean" ? embed::SeedAggregation::Mean
                                                 : embed::SeedAggregation::Max;

  Manifest m;
  std::vector<std::string> warnings;
  std::vector<expand::CategoryExpansion> expansions;
  std::vector<expand::CategorySpec> specs;
  auto cat_stats = ordered_json::array();
  for (const auto& cat : cfg.categories) {
    expand::CategorySpec spec{cat.id, cat.factor, cat.parent, true};
    specs.push_back(spec);
    std::vector<text::TokenStream> inside;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus.articles()[i].has_category(cat.id)) inside.push_back(streams[i]);
    }
    auto category_table = text::build_term_table(inside, cat.id, cfg.threads);
    auto expansion = expand::expand_one(corpus, streams, spec, category_table,
                                        parents.at(cat.parent), table, params, cfg.threads,
                                        &warnings);
    std::string safe = cat.id;
    expand::write_audit_json(dir / ("audit_" + safe + ".json"), expansion);
    expand::write_id_file(dir / ("expanded_" + safe + ".ids"), expansion.expanded_ids);
    text::write_term_table_csv(dir / ("term_table_" + safe + ".csv"), category_table);
    m.outputs["audit_" + safe + ".json"] = "";
    m.outputs["expanded_" + safe + ".ids"] = "";
    m.outputs["term_table_" + safe + ".csv"] = "";
    ordered_json cs;
    cs["category"] = cat.id;
    cs["threshold"] = expansion.stats.threshold;
    cs["expanded"] = expansion.expanded_ids.size();
    cs["inside"] = expansion.inside_n;
    cat_stats.push_back(std::move(cs));
    expansions.push_back(std::move(expansion));
  }
  auto field = expand::build_field_corpus(corpus, specs, expansions);
  expand::write_id_file(dir / "field_corpus.ids", field);
  m.outputs["field_corpus.ids"] = "";
  if (cfg.embedding_mode != "external") m.outputs["embeddings.txt"] = "";
  m.stats["categories"] = std::move(cat_stats);
  m.stats["field_articles"] = field.size();
  m.stats["warnings"] = warnings.size();
  for (auto& [f, digest] : m.outputs) digest = util::digest_file(dir / f);
  return m;
}

Manifest produce_topics(const RunConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.doc_topic.empty() || cfg.topic_words.empty()) {
    throw ConfigError("topics: doc_topic and topic_words inputs are required");
  }
  ModelBundle b = load_model_bundle(cfg);
  auto salience = topics::topic_category_salience(b.model, b.presence, b.corpus);
  auto assignment = topics::assign_topic_category(salience);

  {
    std::ostringstream out;
    out << "topic,category,occurrences,defined\n";
    for (std::size_t t = 0; t < b.model.n_topics(); ++t) {
      out << util::csv_escape(b.model.topic_ids[t]) << ',' << util::csv_escape(assignment[t])
          << ',' << b.presence.topic_counts[t] << ',' << (salience.defined[t] ? 1 : 0) << '\n';
    }
    util::write_text(dir / "assignments.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "topic,category,quotient\n";
    for (std::size_t t = 0; t < b.model.n_topics(); ++t) {
      if (!salience.defined[t]) continue;
      for (std::size_t c = 0; c < salience.categories.size(); ++c) {
        double q = salience.quotient(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
        if (std::isnan(q)) continue;
        out << util::csv_escape(b.model.topic_ids[t]) << ','
            << util::csv_escape(salience.categories[c]) << ',' << util::format_double(q) << '\n';
      }
    }
    util::write_text(dir / "salience_q.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "year,category,share,presences\n";
    for (const auto& row : topics::category_share_series(b.model, b.presence, assignment)) {
      out << row.year << ',' << util::csv_escape(row.category) << ','
          << util::format_double(row.share) << ',' << row.presences << '\n';
    }
    util::write_text(dir / "category_shares.csv", out.str());
  }
  Manifest m;
  if (cfg.comparison_enabled) {
    auto mask = comparison_mask(cfg, b);
    bool any_in = std::find(mask.begin(), mask.end(), true) != mask.end();
    bool any_out = std::find(mask.begin(), mask.end(), false) != mask.end();
    if (any_in && any_out) {
      std::ostringstream out;
      out << "topic,category,share_in,share_out,occurrences\n";
      auto rows = topics::group_topic_share_comparison(b.model, b.presence, mask, assignment);
      for (const auto& r : rows) {
        out << util::csv_escape(r.topic_id) << ',' << util::csv_escape(r.category) << ','
            << util::format_double(r.share_in) << ',' << util::format_double(r.share_out) << ','
            << r.occurrences << '\n';
      }
      util::write_text(dir / "group_topic_shares.csv", out.str());
      m.outputs["group_topic_shares.csv"] = "";
    } else {
      m.stats["group_comparison"] = "skipped: one side of the split is empty";
    }
  }
  ordered_json summary;
  summary["articles"] = b.model.n_articles();
  summary["topics_kept"] = b.model.n_topics();
  summary["removed_prevalent"] = b.filter.removed_prevalent.size();
  summary["removed_few_words"] = b.filter.removed_few_words.size();
  summary["unknown_articles"] = b.diagnostics.unknown_articles.size();
  summary["missing_articles"] = b.diagnostics.missing_articles.size();
  util::write_text(dir / "model_summary.json", summary.dump(2) + "\n");
  m.stats = summary;
  for (const auto& f : {"assignments.csv", "salience_q.csv", "category_shares.csv",
                        "model_summary.json"}) {
    m.outputs[f] = "";
  }
  for (auto& [f, digest] : m.outputs) digest = util::digest_file(dir / f);
  return m;
}

Manifest produce_diversity(const RunConfig& cfg, const std::filesystem::path& dir) {
  ModelBundle b = load_model_bundle(cfg);
  auto options = metric_options(cfg);
  auto windows = yearly_windows(cfg, b.model);
  auto series = diversity::diversity_timeseries(b.model, b.presence, windows, options,
                                                cfg.threads);
  {
    std::ostringstream out;
    out << "window,family,paramset,raw,zscore\n";
    for (const auto& pt : series) {
      out << pt.window << ',' << pt.family << ',' << pt.paramset << ','
          << (pt.raw ? util::format_double(*pt.raw) : "") << ','
          << (pt.zscore ? util::format_double(*pt.zscore) : "") << '\n';
    }
    util::write_text(dir / "timeseries.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "window,fraction,share,topics\n";
    for (const auto& w : windows) {
      std::vector<std::size_t> rows;
      for (std::size_t a = 0; a < b.model.n_articles(); ++a) {
        if (b.model.years[a] >= w.first && b.model.years[a] <= w.last) rows.push_back(a);
      }
      if (rows.empty()) continue;
      for (const auto& pt : diversity::top_topic_concentration(b.presence, rows, cfg.fractions)) {
        out << w.label() << ',' << util::format_double(pt.fraction) << ','
            << util::format_double(pt.share) << ',' << pt.topics_counted << '\n';
      }
    }
    util::write_text(dir / "concentration.csv", out.str());
  }
  Manifest m;
  m.outputs["timeseries.csv"] = "";
  m.outputs["concentration.csv"] = "";
  if (cfg.comparison_enabled) {
    auto mask = comparison_mask(cfg, b);
    std::vector<std::size_t> in_rows, out_rows;
    for (std::size_t r = 0; r < b.model.n_articles(); ++r) {
      if (cfg.comparison_min_year > 0 && b.model.years[r] < cfg.comparison_min_year) continue;
      (mask[r] ? in_rows : out_rows).push_back(r);
    }
    if (!in_rows.empty() && !out_rows.empty() &&
        (cfg.sample_n <= in_rows.size() || cfg.sample_n <= out_rows.size())) {
      std::string label_in;
      for (const auto& k : cfg.comparison_kinds) {
        if (!label_in.empty()) label_in += "+";
        label_in += k;
      }
      std::vector<std::string> warnings;
      auto rows = diversity::sampled_group_comparison(
          b.model, b.presence, in_rows, out_rows, label_in, "rest", cfg.sample_n,
          cfg.sample_runs, util::derive_seed(cfg.seed, 2), options, &warnings, cfg.threads);
      std::ostringstream out;
      out << "group,family,paramset,mean,sd,runs,n,seed\n";
      for (const auto& r : rows) {
        out << util::csv_escape(r.group) << ',' << r.family << ',' << r.paramset << ','
            << util::format_double(r.mean) << ',' << util::format_double(r.sd) << ',' << r.runs
            << ',' << r.n << ',' << r.seed << '\n';
      }
      util::write_text(dir / "sampled_comparison.csv", out.str());
      m.outputs["sampled_comparison.csv"] = "";
      m.stats["sampling_warnings"] = warnings.size();
    } else {
      m.stats["sampled_comparison"] = "skipped: groups too small for the sample size";
    }
  }
  m.stats["windows"] = windows.size();
  for (auto& [f, digest] : m.outputs) digest = util::digest_file(dir / f);
  return m;
}

Manifest produce_network(const RunConfig& cfg, const std::filesystem::path& dir) {
  ModelBundle b = load_model_bundle(cfg);
  auto salience = topics::topic_category_salience(b.model, b.presence, b.corpus);
  auto assignment = topics::assign_topic_category(salience);
  std::vector<corpus::YearWindow> windows;
  if (!cfg.network_windows.empty()) {
    for (const auto& w : cfg.network_windows) windows.push_back({w[0], w[1]});
  } else {
    int lo = *std::min_element(b.model.years.begin(), b.model.years.end());
    int hi = *std::max_element(b.model.years.begin(), b.model.years.end());
    windows.push_back({lo, hi});
  }
  Manifest m;
  std::ostringstream stats_csv;
  stats_csv << "window,nodes,edges,components,largest_component,avg_path_length,diameter,"
               "mst_avg_path_length,mst_diameter\n";
  std::ostringstream rank_csv;
  rank_csv << "window,fraction,mean_centrality\n";
  for (const auto& w : windows) {
    std::vector<std::size_t> rows;
    for (std::size_t a = 0; a < b.model.n_articles(); ++a) {
      if (b.model.years[a] >= w.first && b.model.years[a] <= w.last) rows.push_back(a);
    }
    auto graph = netan::build_cooc_graph(b.model, b.presence, rows, assignment, cfg.threads);
    auto mst = netan::max_spanning_tree(graph);
    auto centrality = netan::eigenvector_centrality(graph);
    auto stats = netan::network_stats(graph, cfg.threads);
    netan::CoocGraph mst_graph = graph;
    mst_graph.edges = mst;
    auto mst_stats = netan::network_stats(mst_graph, cfg.threads);

    std::string label = w.label();
    netan::write_edge_csv(dir / ("network_" + label + "_edges.csv"), graph, graph.edges);
    netan::write_edge_csv(dir / ("network_" + label + "_mst.csv"), graph, mst);
    netan::write_node_csv(dir / ("network_" + label + "_nodes.csv"), graph, centrality.score);
    m.outputs["network_" + label + "_edges.csv"] = "";
    m.outputs["network_" + label + "_mst.csv"] = "";
    m.outputs["network_" + label + "_nodes.csv"] = "";

    stats_csv << label << ',' << graph.node_count() << ',' << graph.edges.size() << ','
              << stats.components << ',' << stats.largest_component_size << ','
              << (stats.avg_path_length ? util::format_double(*stats.avg_path_length) : "")
              << ',' << (stats.diameter ? std::to_string(*stats.diameter) : "") << ','
              << (mst_stats.avg_path_length ? util::format_double(*mst_stats.avg_path_length)
                                            : "")
              << ',' << (mst_stats.diameter ? std::to_string(*mst_stats.diameter) : "") << '\n';
    auto ranks = netan::centrality_by_rank(centrality.score, graph.occurrences, cfg.fractions);
    for (std::size_t i = 0; i < cfg.fractions.size(); ++i) {
      rank_csv << label << ',' << util::format_double(cfg.fractions[i]) << ','
               << (ranks[i] ? util::format_double(*ranks[i]) : "") << '\n';
    }
  }
  util::write_text(dir / "network_stats.csv", stats_csv.str());
  util::write_text(dir / "centrality_by_rank.csv", rank_csv.str());
  m.outputs["network_stats.csv"] = "";
  m.outputs["centrality_by_rank.csv"] = "";
  m.stats["windows"] = windows.size();
  for (auto& [f, digest] : m.outputs) digest = util::digest_file(dir / f);
  return m;
}

Manifest produce_panel(const RunConfig& cfg, const std::filesystem::path& dir) {
  ModelBundle b = load_model_bundle(cfg);
  corpus::YearWindow span{};
  if (cfg.panel_years) {
    span = {(*cfg.panel_years)[0], (*cfg.panel_years)[1]};
  } else {
    int hi = *std::max_element(b.model.years.begin(), b.model.years.end());
    span = {hi - 2, hi};  // last three years
  }
  std::vector<std::string> warnings;
  auto rows = panel::build_panel(b.corpus, b.model, b.presence, span, cfg.panel_min_papers,
                                 metric_options(cfg), cfg.threads, &warnings);
  {
    std::ostringstream out;
    out << "org,kind,year,family,paramset,raw,z,is_company,article_n,log_article_n\n";
    for (const auto& r : rows) {
      out << util::csv_escape(r.org) << ',' << corpus::org_kind_name(r.kind) << ',' << r.year
          << ',' << r.family << ',' << r.paramset << ',' << util::format_double(r.diversity_raw)
          << ',' << util::format_double(r.diversity_z) << ',' << (r.is_company ? 1 : 0) << ','
          << r.article_n << ',' << util::format_double(r.log_article_n) << '\n';
    }
    util::write_text(dir / "panel_rows.csv", out.str());
  }

  std::set<int> years_present;
  for (const auto& r : rows) years_present.insert(r.year);
  // Organisation dummies absorb the time-invariant company indicator, so the
  // FE specification drops it; a linear year term only enters when the span
  // has variation.
  std::vector<std::string> base_regressors = {"is_comp", "log_article_n"};
  std::vector<std::string> fe_regressors = {"log_article_n"};
  if (years_present.size() >= 2) {
    base_regressors.push_back("year");
    fe_regressors.push_back("year");
  }

  std::ostringstream reg_csv;
  reg_csv << "family,paramset,org_fe,term,beta,se,t,p,r2,n\n";
  std::ostringstream reg_txt;
  std::ostringstream org_csv;
  org_csv << "org,effect,ci_low,ci_high,papers,kind,reference\n";
  for (const auto& family : {"balance", "weitzman", "rao-stirling"}) {
    std::vector<std::pair<std::string, panel::RegressionFit>> fits;
    for (const auto& set : diversity::all_paramsets()) {
      if (set.family != family) continue;
      std::vector<panel::PanelRow> subset;
      for (const auto& r : rows) {
        if (r.family == set.family && r.paramset == set.paramset) subset.push_back(r);
      }
      if (subset.empty()) continue;
      for (bool org_fe : {false, true}) {
        auto fit = panel::ols_fit(subset, cfg.panel_response,
                                  org_fe ? fe_regressors : base_regressors, false, org_fe);
        for (std::size_t i = 0; i < fit.names.size(); ++i) {
          reg_csv << set.family << ',' << set.paramset << ',' << (org_fe ? 1 : 0) << ','
                  << util::csv_escape(fit.names[i]) << ','
                  << util::format_double(fit.beta[static_cast<Eigen::Index>(i)]) << ','
                  << util::format_double(fit.se[static_cast<Eigen::Index>(i)]) << ','
                  << util::format_double(fit.t[static_cast<Eigen::Index>(i)]) << ','
                  << util::format_double(fit.p[i]) << ',' << util::format_double(fit.r2) << ','
                  << fit.n << '\n';
        }
        if (org_fe && set.family == cfg.panel_report_family &&
            set.paramset == cfg.panel_report_paramset) {
          for (const auto& e : panel::org_fixed_effects_report(fit, subset)) {
            org_csv << util::csv_escape(e.org) << ',' << util::format_double(e.effect) << ','
                    << util::format_double(e.ci_low) << ',' << util::format_double(e.ci_high)
                    << ',' << e.papers << ',' << corpus::org_kind_name(e.kind) << ','
                    << (e.reference ? 1 : 0) << '\n';
          }
        }
        fits.emplace_back(set.paramset, std::move(fit));
      }
    }
    if (!fits.empty()) reg_txt << panel::render_fit_table(family, fits) << '\n';
  }
  util::write_text(dir / "regressions.csv", reg_csv.str());
  util::write_text(dir / "regressions.txt", reg_txt.str());
  util::write_text(dir / "org_effects.csv", org_csv.str());

  Manifest m;
  m.stats["rows"] = rows.size();
  m.stats["years"] = {span.first, span.last};
  m.stats["warnings"] = warnings.size();
  for (const auto& f : {"panel_rows.csv", "regressions.csv", "regressions.txt",
                        "org_effects.csv"}) {
    m.outputs[f] = "";
  }
  for (auto& [f, digest] : m.outputs) digest = util::digest_file(dir / f);
  return m;
}

Manifest produce_report(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::string text = report_text(cfg);
  util::write_text(dir / "summary.md", text);
  Manifest m;
  m.outputs["summary.md"] = util::digest_file(dir / "summary.md");
  return m;
}

}  // namespace

bool run_stage(const RunConfig& config, Stage stage) {
  if (config.out_dir.empty()) throw ConfigError("no output directory configured");
  std::string key;
  try {
    key = stage_key(config, stage);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage_name(stage)) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage_name(stage)) + ": " + e.what());
  }
  auto dir = stage_dir(config, stage);
  auto existing = read_manifest(dir);
  if (existing && existing->config_key == key) {
    bool complete = true;
    for (const auto& [f, _] : existing->outputs) {
      if (!std::filesystem::exists(dir / f)) complete = false;
    }
    if (complete) return false;  // cached
  }
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "manifest.json");  // absent manifest == stale outputs
  Manifest m;
  try {
    switch (stage) {
      case Stage::Ingest: m = produce_ingest(config, dir); break;
      case Stage::Expand: m = produce_expand(config, dir); break;
      case Stage::Topics: m = produce_topics(config, dir); break;
      case Stage::Diversity: m = produce_diversity(config, dir); break;
      case Stage::Network: m = produce_network(config, dir); break;
      case Stage::Panel: m = produce_panel(config, dir); break;
      case Stage::Report: m = produce_report(config, dir); break;
    }
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage_name(stage)) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage_name(stage)) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage_name(stage)) + ": " + e.what());
  }
  m.stage = std::string(stage_name(stage));
  m.version = std::string(kVersion);
  m.seed = config.seed;
  m.config_key = key;
  write_manifest(dir, m);
  return true;
}

void run_all(const RunConfig& config) {
  for (Stage s : {Stage::Ingest, Stage::Expand, Stage::Topics, Stage::Diversity, Stage::Network,
                  Stage::Panel, Stage::Report}) {
    run_stage(config, s);
  }
}

namespace {

// Minimal CSV table reader for report assembly.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> col(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

std::optional<Table> read_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto lines = util::read_lines(path);
  if (lines.empty()) return std::nullopt;
  Table t;
  t.header = util::parse_csv_line(lines[0]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (!lines[i].empty()) t.rows.push_back(util::parse_csv_line(lines[i]));
  }
  return t;
}

}  // namespace

std::string report_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# divscope run summary\n\n";

  auto ingest = read_manifest(stage_dir(cfg, Stage::Ingest));
  out << "## Corpus\n\n";
  if (!ingest) {
    out << "- skipped (ingest stage has not run)\n\n";
  } else {
    out << "- articles: " << ingest->stats.value("articles", 0) << "\n";
    out << "- rejected records: " << ingest->stats.value("rejected", 0) << "\n";
    out << "- empty abstracts: " << ingest->stats.value("empty_abstracts", 0) << "\n\n";
  }

  auto exp = read_manifest(stage_dir(cfg, Stage::Expand));
  out << "## Field expansion\n\n";
  if (!exp) {
    out << "- skipped (expand stage has not run)\n\n";
  } else {
    out << "- field corpus size: " << exp->stats.value("field_articles", 0) << "\n";
    if (exp->stats.contains("categories")) {
      out << "\n| category | threshold | expanded |\n|---|---|---|\n";
      for (const auto& c : exp->stats["categories"]) {
        out << "| " << c.value("category", std::string()) << " | "
            << util::format_double(c.value("threshold", 0.0), 6) << " | "
            << c.value("expanded", 0) << " |\n";
      }
    }
    out << "\n";
  }

  auto top = read_manifest(stage_dir(cfg, Stage::Topics));
  out << "## Topics\n\n";
  if (!top) {
    out << "- skipped (topics stage has not run)\n\n";
  } else {
    out << "- modelled articles: " << top->stats.value("articles", 0) << "\n";
    out << "- topics kept: " << top->stats.value("topics_kept", 0) << " (removed "
        << top->stats.value("removed_prevalent", 0) << " prevalent, "
        << top->stats.value("removed_few_words", 0) << " short-word)\n\n";
  }

  out << "## Diversity\n\n";
  auto div = read_manifest(stage_dir(cfg, Stage::Diversity));
  if (!div) {
    out << "- skipped (diversity stage has not run)\n\n";
  } else {
    auto series = read_table(stage_dir(cfg, Stage::Diversity) / "timeseries.csv");
    if (series) {
      auto fam = series->col("family");
      auto set = series->col("paramset");
      auto zc = series->col("zscore");
      auto wc = series->col("window");
      out << "| family | paramset | first window | last window | z trend (smoothed) |\n"
          << "|---|---|---|---|---|\n";
      for (const auto& fp : diversity::all_paramsets()) {
        std::vector<double> zs;
        std::string first_w, last_w;
        for (const auto& row : series->rows) {
          if (row[*fam] != fp.family || row[*set] != fp.paramset) continue;
          if (row[*zc].empty()) continue;
          if (first_w.empty()) first_w = row[*wc];
          last_w = row[*wc];
          zs.push_back(std::stod(row[*zc]));
        }
        std::string trend = "n/a";
        if (zs.size() >= 3) {
          auto smoothed = util::rolling_mean(zs, cfg.smoothing_window);
          double delta = smoothed.back() - smoothed.front();
          trend = delta > 0.25 ? "increasing" : (delta < -0.25 ? "declining" : "flat");
        }
        out << "| " << fp.family << " | " << fp.paramset << " | " << first_w << " | " << last_w
            << " | " << trend << " |\n";
      }
      out << "\n";
    }
    auto sampled = read_table(stage_dir(cfg, Stage::Diversity) / "sampled_comparison.csv");
    if (sampled) {
      out << "### Equal-size group comparison\n\n";
      out << "| group | family | paramset | mean | sd |\n|---|---|---|---|---|\n";
      auto g = sampled->col("group");
      auto f = sampled->col("family");
      auto p = sampled->col("paramset");
      auto mean = sampled->col("mean");
      auto sd = sampled->col("sd");
      for (const auto& row : sampled->rows) {
        out << "| " << row[*g] << " | " << row[*f] << " | " << row[*p] << " | " << row[*mean]
            << " | " << row[*sd] << " |\n";
      }
      out << "\n";
    }
  }

  out << "## Topic network\n\n";
  auto net = read_manifest(stage_dir(cfg, Stage::Network));
  if (!net) {
    out << "- skipped (network stage has not run)\n\n";
  } else {
    auto stats = read_table(stage_dir(cfg, Stage::Network) / "network_stats.csv");
    if (stats) {
      out << "| window | nodes | edges | components | avg path length | diameter |\n"
          << "|---|---|---|---|---|---|\n";
      auto w = stats->col("window");
      auto nodes = stats->col("nodes");
      auto edges = stats->col("edges");
      auto comp = stats->col("components");
      auto apl = stats->col("avg_path_length");
      auto dia = stats->col("diameter");
      for (const auto& row : stats->rows) {
        out << "| " << row[*w] << " | " << row[*nodes] << " | " << row[*edges] << " | "
            << row[*comp] << " | " << row[*apl] << " | " << row[*dia] << " |\n";
      }
      out << "\n";
    }
  }

  out << "## Organisation panel\n\n";
  auto pan = read_manifest(stage_dir(cfg, Stage::Panel));
  if (!pan) {
    out << "- skipped (panel stage has not run)\n\n";
  } else {
    out << "- rows: " << pan->stats.value("rows", 0) << "\n\n";
    auto txt_path = stage_dir(cfg, Stage::Panel) / "regressions.txt";
    if (std::filesystem::exists(txt_path)) {
      out << "```\n" << util::read_text(txt_path) << "```\n\n";
    }
  }
  return out.str();
}

}  // namespace divscope::pipeline
