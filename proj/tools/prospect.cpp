// prospect: build factor stacks, train and compare models, generate a
// synthetic basin, score existing maps, render grids to PGM.

#include <iostream>

#include <CLI11.hpp>

#include "prospect/evaluate.hpp"
#include "prospect/pipeline.hpp"
#include "prospect/raster.hpp"
#include "prospect/render.hpp"
#include "prospect/synth.hpp"

namespace {

enum Exit { ok = 0, usage = 1, config = 2, data = 3, training = 4 };

int report(const char* kind, const std::string& msg, int code) {
  std::cerr << "prospect: " << kind << ": " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace prospect;
  CLI::App app{"Oil prospectivity mapping toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, pred_path, truth_path, in_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::size_t rows = 200, cols = 200;

  auto* build = app.add_subcommand("build", "Build the normalised factor stack only");
  auto* train = app.add_subcommand("train", "Full run: stack, split, train, evaluate, maps, manifest");
  for (auto* sc : {build, train}) {
    sc->add_option("--config", config_path, "Pipeline config file")->required();
    sc->add_option("--seed", seed, "Override the run seed");
    sc->add_option("--out", out_dir, "Output directory (default: from config)");
    sc->add_option("--threshold", threshold, "Binarisation threshold");
  }

  auto* synth = app.add_subcommand("synth", "Generate a synthetic basin and its config");
  synth->add_option("--seed", seed, "Generator seed (default 42)");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--rows", rows, "Grid rows (>= 100)");
  synth->add_option("--cols", cols, "Grid columns (>= 100)");

  auto* evalc = app.add_subcommand("eval", "Metrics of a potential map against a binary truth grid");
  evalc->add_option("--pred", pred_path, "Potential map (.asc)")->required();
  evalc->add_option("--truth", truth_path, "Binary truth grid (.asc)")->required();
  evalc->add_option("--threshold", threshold, "Binarisation threshold (default 0.5)");
  evalc->add_option("--out", out_dir, "Write metrics to this file instead of stdout");

  auto* render = app.add_subcommand("render", "Render an ASCII grid as an 8-bit PGM");
  render->add_option("--in", in_path, "Input grid (.asc)")->required();
  render->add_option("--out", out_dir, "Output image (.pgm)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build || *train) {
      const auto cfg = pipeline::load_config(config_path);
      pipeline::RunOptions opt;
      opt.seed = seed;
      opt.threshold = threshold;
      if (!out_dir.empty()) opt.output = out_dir;
      opt.log = &std::cout;
      if (*build) {
        const auto st = pipeline::build(cfg, opt);
        std::cout << "built " << st.grids.size() << " factors\n";
      } else {
        pipeline::run(cfg, opt);
      }
    } else if (*synth) {
      auto header = synth::default_header();
      header.nrows = rows;
      header.ncols = cols;
      const auto b = synth::generate_synthetic_basin(seed.value_or(42), out_dir, header);
      std::cout << "wrote synthetic basin with " << b.fields.size() << " fields to " << out_dir << "\n";
    } else if (*evalc) {
      const Grid pred = read_ascii_grid(pred_path);
      const Grid truth = read_ascii_grid(truth_path);
      assert_aligned({&pred, &truth});
      std::vector<double> p, t;
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred.valid(i) && truth.valid(i)) {
          p.push_back(pred[i]);
          t.push_back(truth[i]);
        }
      const auto m = eval::evaluate(p, t, threshold.value_or(eval::kDefaultThreshold));
      const auto text = eval::format_metrics(m);
      if (out_dir.empty()) std::cout << text;
      else write_file_atomic(out_dir, text);
    } else if (*render) {
      render_map(read_ascii_grid(in_path), out_dir);
    }
  } catch (const pipeline::StageError& e) {
    using K = pipeline::StageError::Kind;
    if (e.kind == K::config) return report("config error", e.what(), config);
    if (e.kind == K::training) return report("training failure", e.what(), training);
    return report("data error", e.what(), data);
  } catch (const ConfigError& e) {
    return report("config error", e.what(), config);
  } catch (const TrainingError& e) {
    return report("training failure", e.what(), training);
  } catch (const Error& e) {
    return report("data error", e.what(), data);
  } catch (const std::filesystem::filesystem_error& e) {
    return report("data error", e.what(), data);
  }
  return ok;
}
