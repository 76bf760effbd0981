#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "divscope/errors.hpp"
#include "divscope/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Run configuration (JSON)")->required();
  cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "Seed override");
  cmd->add_option("--threads", opts.threads, "Worker thread count override");
}

divscope::pipeline::RunConfig make_config(const CommonOptions& opts) {
  auto cfg = divscope::pipeline::load_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (!opts.seed.empty()) cfg.seed = std::stoull(opts.seed);
  if (opts.threads > 0) cfg.threads = opts.threads;
  if (cfg.out_dir.empty()) {
    throw divscope::ConfigError("no output directory: set out_dir in the config or pass --out");
  }
  return cfg;
}

int dispatch(const std::string& name, const CommonOptions& opts) {
  using divscope::pipeline::Stage;
  auto cfg = make_config(opts);
  auto run_one = [&](Stage stage) {
    bool ran = divscope::pipeline::run_stage(cfg, stage);
    std::fprintf(stderr, "%s: %s\n", std::string(divscope::pipeline::stage_name(stage)).c_str(),
                 ran ? "done" : "cached");
  };
  if (name == "run") {
    for (Stage s : {Stage::Ingest, Stage::Expand, Stage::Topics, Stage::Diversity,
                    Stage::Network, Stage::Panel, Stage::Report}) {
      run_one(s);
    }
    return 0;
  }
  if (name == "ingest") run_one(Stage::Ingest);
  else if (name == "expand") run_one(Stage::Expand);
  else if (name == "topics") run_one(Stage::Topics);
  else if (name == "diversity") run_one(Stage::Diversity);
  else if (name == "network") run_one(Stage::Network);
  else if (name == "panel") run_one(Stage::Panel);
  else if (name == "report") {
    run_one(Stage::Report);
    std::fputs(divscope::pipeline::report_text(cfg).c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"divscope: research-field diversity analytics over pre-print metadata"};
  app.require_subcommand(1);

  const char* subcommands[] = {"ingest", "expand",  "topics", "diversity",
                               "network", "panel",  "report", "run"};
  const char* descriptions[] = {
      "Load, normalize and slice article metadata",
      "Salient-vocabulary expansion and field corpus assembly",
      "Topic model ingestion, filtering and category salience",
      "Diversity metric time series, concentration and sampling",
      "Topic co-occurrence network analytics",
      "Organisation-year diversity panel and regressions",
      "Summarize a finished run",
      "Execute the whole pipeline",
  };
  std::map<std::string, CommonOptions> option_sets;
  for (std::size_t i = 0; i < std::size(subcommands); ++i) {
    auto* cmd = app.add_subcommand(subcommands[i], descriptions[i]);
    add_common(cmd, option_sets[subcommands[i]]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::string name = app.get_subcommands().front()->get_name();
  try {
    return dispatch(name, option_sets[name]);
  } catch (const divscope::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const divscope::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const divscope::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitNumeric;
  }
}
