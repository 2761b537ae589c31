// kakamatch: unsupervised feature-based image matching for individual
// re-identification. Subcommands cover the full pipeline: frame selection,
// masked feature extraction, pair matching, gallery ranking, labelled
// evaluation, synthetic benchmark generation and match visualisation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kakamatch/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kakamatch;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  int threads = 0;
  bool force = false;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  PipelineConfig cfg;
  std::string path = g.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("KAKAMATCH_CONFIG")) path = env;
  }
  if (!path.empty()) cfg = load_config(path);
  if (g.seed_override) cfg.seed = *g.seed_override;
  validate_config(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-based image matching pipeline"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("-c,--config", global.config_path,
                 "config file (flat key=value); falls back to $KAKAMATCH_CONFIG");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the pipeline seed");
  app.add_option("--threads", global.threads, "worker threads (0 = hardware)");
  app.add_flag("--force", global.force, "rewrite outputs that already exist");

  // select-frames
  auto* sel = app.add_subcommand("select-frames", "probe-point frame selection over a directory");
  std::string sel_in, sel_out;
  sel->add_option("--in", sel_in, "directory of .pgm/.ppm frames")->required();
  sel->add_option("--out", sel_out, "manifest file to write")->required();

  // features
  auto* feat = app.add_subcommand("features", "extract (optionally masked) features");
  std::string feat_in, feat_out, feat_bg;
  feat->add_option("--in", feat_in, "directory of .pgm/.ppm images")->required();
  feat->add_option("--out", feat_out, "directory for .siftv1 feature files")->required();
  feat->add_option("--background", feat_bg,
                   "sample background image for the localisation mask; per-clip "
                   "backgrounds/<clip>.pgm under --in take precedence");

  // match
  auto* match = app.add_subcommand("match", "match two feature files and report");
  std::string match_a, match_b, match_out;
  match->add_option("feat_a", match_a, ".siftv1 file A")->required();
  match->add_option("feat_b", match_b, ".siftv1 file B")->required();
  match->add_option("--out", match_out, "report JSON path (default: stdout)");

  // rank
  auto* rank = app.add_subcommand("rank", "rank gallery matches for a query image");
  std::string rank_query, rank_features, rank_labels, rank_out, rank_csv;
  rank->add_option("query", rank_query, "query image id")->required();
  rank->add_option("--features", rank_features, "directory of .siftv1 files")->required();
  rank->add_option("--labels", rank_labels, "labels CSV (filename,label)");
  rank->add_option("--out", rank_out, "ranking JSON path (default: stdout)");
  rank->add_option("--csv", rank_csv, "also write the ranking as CSV");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "top-X accuracy over a labelled index");
  std::string eval_features, eval_labels, eval_out;
  int eval_x = 1;
  eval->add_option("--features", eval_features, "directory of .siftv1 files")->required();
  eval->add_option("--labels", eval_labels, "labels CSV (filename,label)")->required();
  eval->add_option("--x", eval_x, "top-X cutoff")->default_val(1);
  eval->add_option("--out", eval_out, "report JSON path");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark corpus");
  std::string synth_out;
  int synth_n = 10, synth_views = 12, synth_size = 256;
  synth->add_option("--out", synth_out, "corpus directory")->required();
  synth->add_option("--individuals", synth_n, "number of individuals")->default_val(10);
  synth->add_option("--views", synth_views, "views per individual")->default_val(12);
  synth->add_option("--size", synth_size, "canvas side in pixels")->default_val(256);

  // visualize
  auto* vis = app.add_subcommand("visualize", "render a side-by-side match overlay");
  std::string vis_a, vis_b, vis_report, vis_out;
  vis->add_option("image_a", vis_a, "left image (.pgm/.ppm)")->required();
  vis->add_option("image_b", vis_b, "right image (.pgm/.ppm)")->required();
  vis->add_option("--report", vis_report, "pair-match report JSON")->required();
  vis->add_option("--out", vis_out, "output overlay (.ppm)")->required();

  // global flags may follow the subcommand
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }
  if (seed_opt->count() > 0) global.seed_override = seed_value;

  try {
    const PipelineConfig cfg = resolve_config(global);

    if (sel->parsed()) {
      const auto r = cmd_select_frames(sel_in, sel_out);
      std::cout << "selected " << r.selected << " of " << r.examined << " frames -> " << sel_out
                << "\n";
    } else if (feat->parsed()) {
      std::optional<fs::path> bg;
      if (!feat_bg.empty()) bg = feat_bg;
      const auto r = cmd_features(feat_in, bg, feat_out, cfg, global.force, global.threads);
      std::cout << "wrote " << r.written << " feature files (" << r.skipped << " kept) -> "
                << feat_out << "\n";
    } else if (match->parsed()) {
      const nlohmann::json report = cmd_match(match_a, match_b, cfg);
      if (match_out.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        write_text(match_out, report.dump(2) + "\n");
      }
    } else if (rank->parsed()) {
      std::optional<fs::path> labels;
      if (!rank_labels.empty()) labels = rank_labels;
      const RankedResult ranked = cmd_rank(rank_query, rank_features, labels, cfg);
      const nlohmann::json j = ranking_json(ranked);
      if (rank_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_text(rank_out, j.dump(2) + "\n");
      }
      if (!rank_csv.empty()) write_text(rank_csv, ranking_csv(ranked));
    } else if (eval->parsed()) {
      const LabelTable table = cmd_evaluate(eval_features, eval_labels, eval_x, cfg, global.threads);
      std::cout << render_table(table);
      if (!eval_out.empty()) write_text(eval_out, table_json(table).dump(2) + "\n");
    } else if (synth->parsed()) {
      SynthSpec spec;
      spec.n_individuals = synth_n;
      spec.views_per_individual = synth_views;
      spec.seed = cfg.seed;
      spec.out_dir = synth_out;
      spec.width = synth_size;
      spec.height = synth_size;
      const DatasetIndex index = cmd_synth(spec);
      std::cout << "generated " << index.entries.size() << " images (" << synth_n
                << " individuals x " << synth_views << " views) -> " << synth_out << "\n";
    } else if (vis->parsed()) {
      cmd_visualize(vis_a, vis_b, vis_report, vis_out);
      std::cout << "wrote " << vis_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
