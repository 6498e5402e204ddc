#include "indcal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "indcal/calibration.hpp"
#include "indcal/data.hpp"
#include "indcal/decision.hpp"
#include "indcal/errors.hpp"
#include "indcal/serialization.hpp"
#include "indcal/training.hpp"

namespace indcal::cli {

namespace fs = std::filesystem;

namespace {

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("INDCAL_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ConfigError(flag + ": required");
  if (!fs::is_regular_file(path)) throw ConfigError(flag + ": no such file '" + path + "'");
}

// Writes through a temporary so an interrupted run never leaves a partial file.
void write_atomically(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, text);
  fs::rename(tmp, path);
}

std::string cell_name(double alpha, std::uint64_t seed) {
  return "alpha-" + format_double(alpha) + "/seed-" + std::to_string(seed);
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string kind;
  std::optional<std::size_t> n;
  std::optional<std::size_t> dim;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::string config;
  std::vector<double> fractions{0.6, 0.2, 0.2};
  std::string out;
};

void cmd_gen(const GenArgs& a, std::ostream& out) {
  GeneratorSpec spec;
  if (!a.config.empty()) {
    spec = generator_spec_from_json(read_json_file(a.config));
    if (!a.kind.empty() && parse_generator_kind(a.kind) != spec.kind) {
      throw ConfigError("kind: --kind disagrees with the config file");
    }
  } else {
    const GeneratorKind kind = parse_generator_kind(a.kind.empty() ? "heteroscedastic" : a.kind);
    switch (kind) {
      case GeneratorKind::kToy: spec = default_toy_spec(); break;
      case GeneratorKind::kHeteroscedastic: spec = default_heteroscedastic_spec(); break;
      case GeneratorKind::kCredit: spec = default_credit_spec(); break;
    }
  }
  if (a.n) spec.n = *a.n;
  if (a.dim) spec.dim = *a.dim;
  if (a.seed) spec.seed = *a.seed;
  if (a.noise) spec.noise = *a.noise;
  spec.validate();
  if (a.fractions.size() != 3) throw ConfigError("split: expected three fractions");

  std::optional<double> y0;
  Dataset data = [&] {
    if (spec.kind == GeneratorKind::kCredit) {
      CreditData c = gen_credit(spec);
      y0 = c.y0;
      return std::move(c.data);
    }
    return generate(spec);
  }();
  const std::uint64_t split_seed = Rng(spec.seed).child("split").next_u64();
  const auto parts = split(data, a.fractions, split_seed);

  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);
  const char* names[] = {"train.csv", "val.csv", "test.csv"};
  for (std::size_t i = 0; i < 3; ++i) {
    write_text_file(dir / names[i], to_csv(parts[i]));
    out << "wrote " << (dir / names[i]).string() << " (" << parts[i].size() << " rows)\n";
  }
  Json meta{{"spec", to_json(spec)}, {"split", a.fractions}};
  meta["y0"] = y0 ? Json(*y0) : Json(nullptr);
  write_json_file(dir / "generator.json", meta);
  out << "wrote " << (dir / "generator.json").string() << "\n";
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string train;
  std::string val;
  std::string heldout;
  std::string target = "y";
  std::string config;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  double epsilon = 0.1;
  double gamma = 0.05;
  bool verbose = false;
  std::string out;
};

TrainConfig train_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : train_config_from_json(read_json_file(path));
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.train, "--train");
  require_file(a.val, "--val");
  if (!a.heldout.empty()) require_file(a.heldout, "--heldout");
  TrainConfig config = train_config(a.config);
  if (a.alpha) config.alpha = *a.alpha;
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  config.validate();
  if (!(a.epsilon >= 0.0 && a.epsilon <= 1.0)) throw ConfigError("epsilon: must lie in [0,1]");
  if (!(a.gamma > 0.0 && a.gamma < 1.0)) throw ConfigError("gamma: must lie in (0,1)");

  const Dataset train_set = load_csv(a.train, a.target);
  const Dataset val_set = load_csv(a.val, a.target);
  const Dataset heldout = a.heldout.empty() ? val_set : load_csv(a.heldout, a.target);

  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);
  TrainHooks hooks;
  if (a.verbose) {
    hooks.on_epoch = [&err](const EpochRecord& e) {
      err << "epoch " << e.epoch << " train " << format_double(e.train.combined) << " val "
          << format_double(e.val.combined) << "\n";
    };
  }
  TrainResult result = [&] {
    try {
      return train(train_set, val_set, config, hooks);
    } catch (const TrainingDiverged& e) {
      save_checkpoint(dir / "checkpoint.json", e.last_good(), config);
      write_text_file(dir / "history.csv", history_csv(e.history()));
      throw;
    }
  }();

  save_checkpoint(dir / "checkpoint.json", result.forecaster, config);
  write_text_file(dir / "history.csv", history_csv(result.history));
  Rng rng = Rng(config.seed).child("certificate");
  const MpaicCertificate cert = certify_mpaic(result.forecaster, heldout, a.epsilon, a.gamma, rng);
  write_json_file(dir / "certificate.json", to_json(cert));
  out << "trained " << result.history.size() << " epochs (best " << result.best_epoch << ")"
      << (result.stopped_early ? ", stopped early" : "") << "\n";
  out << "wrote " << (dir / "checkpoint.json").string() << ", history.csv, certificate.json\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string val;
  std::string target = "y";
  std::string config;
  std::vector<double> deltas;
  std::uint64_t seed = 0;
  bool recalibrate = false;
  std::string out;
};

EvalOptions eval_options(const std::string& path) {
  return path.empty() ? EvalOptions{} : eval_options_from_json(read_json_file(path));
}

Json comparison(const CalibrationReport& before, const CalibrationReport& after) {
  Json curve = Json::array();
  for (std::size_t i = 0; i < before.adversarial_curve.size(); ++i) {
    curve.push_back({{"delta", before.adversarial_curve[i].delta},
                     {"before", before.adversarial_curve[i].epsilon_hat},
                     {"after", after.adversarial_curve[i].epsilon_hat}});
  }
  Json j{{"average_w1", {{"before", before.average_w1}, {"after", after.average_w1}}},
         {"mean_nll",
          {{"before", before.sharpness.mean_nll}, {"after", after.sharpness.mean_nll}}},
         {"adversarial_curve", curve}};
  if (before.interpretable_worst && after.interpretable_worst) {
    j["interpretable_worst"] = {{"before", before.interpretable_worst->error},
                                {"after", after.interpretable_worst->error}};
  }
  return j;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.data, "--data");
  if (a.recalibrate) require_file(a.val, "--val");
  EvalOptions options = eval_options(a.config);
  if (!a.deltas.empty()) {
    for (double d : a.deltas) {
      if (!(d > 0.0 && d <= 1.0)) throw ConfigError("deltas: values must lie in (0,1]");
    }
    options.adversarial.deltas = a.deltas;
  }
  const Forecaster f = load_checkpoint(a.checkpoint);
  const Dataset data = load_csv(a.data, a.target);

  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);
  const CalibrationReport report = evaluate(f, data, options, a.seed);
  Json doc = to_json(report);
  write_text_file(dir / "curve.csv", curve_csv(report.adversarial_curve));
  write_text_file(dir / "groups.csv", groups_csv(report.interpretable));

  if (a.recalibrate) {
    const Dataset val = load_csv(a.val, a.target);
    Rng rng = Rng(a.seed).child("recalibrate");
    const Forecaster recal = recalibrate(f, val, rng);
    const CalibrationReport after = evaluate(recal, data, options, a.seed);
    doc["recalibration"] = {{"report", to_json(after)}, {"pairs", comparison(report, after)}};
    write_text_file(dir / "curve_recalibrated.csv", curve_csv(after.adversarial_curve));
    write_text_file(dir / "groups_recalibrated.csv", groups_csv(after.interpretable));
    save_checkpoint(dir / "checkpoint_recalibrated.json", recal,
                    checkpoint_train_config(read_json_file(a.checkpoint)));
    out << "average W1 " << format_double(report.average_w1) << " -> "
        << format_double(after.average_w1) << " after recalibration\n";
  } else {
    out << "average W1 " << format_double(report.average_w1) << "\n";
  }
  write_json_file(dir / "report.json", doc);
  out << "wrote " << (dir / "report.json").string() << "\n";
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string train;
  std::string val;
  std::string test;
  std::string target = "y";
  std::string config;
  std::vector<double> alphas;
  std::optional<std::size_t> seeds;
  std::size_t jobs = 1;
  std::string out;
};

struct SweepConfig {
  std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 1.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double worst_group_delta = 0.2;
  TrainConfig train;
  EvalOptions eval;
};

SweepConfig sweep_config(const std::string& path) {
  SweepConfig c;
  if (path.empty()) return c;
  const Json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("sweep config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "alphas") {
      if (!value.is_array() || value.empty()) throw ConfigError("alphas: expected a non-empty array");
      c.alphas.clear();
      for (const auto& v : value) {
        if (!v.is_number()) throw ConfigError("alphas: expected numbers");
        c.alphas.push_back(v.get<double>());
      }
    } else if (key == "seeds") {
      if (!value.is_array() || value.empty()) throw ConfigError("seeds: expected a non-empty array");
      c.seeds.clear();
      for (const auto& v : value) {
        if (!v.is_number_unsigned()) throw ConfigError("seeds: expected non-negative integers");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (key == "worst_group_delta") {
      if (!value.is_number()) throw ConfigError("worst_group_delta: expected a number");
      c.worst_group_delta = value.get<double>();
    } else if (key == "train") {
      c.train = train_config_from_json(value);
    } else if (key == "eval") {
      c.eval = eval_options_from_json(value);
    } else {
      throw ConfigError("sweep config: unknown key '" + key + "'");
    }
  }
  return c;
}

void cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.train, "--train");
  require_file(a.val, "--val");
  require_file(a.test, "--test");
  SweepConfig config = sweep_config(a.config);
  if (!a.alphas.empty()) config.alphas = a.alphas;
  if (a.seeds) {
    if (*a.seeds == 0) throw ConfigError("seeds: must be at least 1");
    config.seeds.resize(*a.seeds);
    for (std::size_t i = 0; i < *a.seeds; ++i) config.seeds[i] = i;
  }
  for (double alpha : config.alphas) {
    TrainConfig probe = config.train;
    probe.alpha = alpha;
    probe.validate();
  }
  auto& deltas = config.eval.adversarial.deltas;
  if (std::find(deltas.begin(), deltas.end(), config.worst_group_delta) == deltas.end()) {
    deltas.push_back(config.worst_group_delta);
    std::sort(deltas.begin(), deltas.end());
  }
  if (a.jobs == 0) throw ConfigError("jobs: must be at least 1");

  const Dataset train_set = load_csv(a.train, a.target);
  const Dataset val_set = load_csv(a.val, a.target);
  const Dataset test_set = load_csv(a.test, a.target);
  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);

  struct Cell {
    double alpha;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double alpha : config.alphas) {
    for (std::uint64_t seed : config.seeds) cells.push_back({alpha, seed});
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell cell = cells[i];
      const fs::path cell_dir = dir / cell_name(cell.alpha, cell.seed);
      try {
        if (fs::exists(cell_dir / "report.json")) {
          std::lock_guard lock(log_mutex);
          err << "skip " << cell_name(cell.alpha, cell.seed) << " (done)\n";
          continue;
        }
        TrainConfig tc = config.train;
        tc.alpha = cell.alpha;
        tc.seed = cell.seed;
        const TrainResult result = train(train_set, val_set, tc);
        fs::create_directories(cell_dir);
        save_checkpoint(cell_dir / "checkpoint.json", result.forecaster, tc);
        write_text_file(cell_dir / "history.csv", history_csv(result.history));
        const CalibrationReport report = evaluate(result.forecaster, test_set, config.eval, cell.seed);
        write_atomically(cell_dir / "report.json", to_json(report).dump(2) + "\n");
        std::lock_guard lock(log_mutex);
        err << "done " << cell_name(cell.alpha, cell.seed) << "\n";
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const std::size_t jobs = std::min(a.jobs, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::string summary = "alpha,seed,nll,mean_sigma,worst_group_err,worst_interp_err\n";
  for (const Cell& cell : cells) {
    const Json report = read_json_file(dir / cell_name(cell.alpha, cell.seed) / "report.json");
    double worst_group = -1.0;
    for (const auto& p : report.at("adversarial_curve")) {
      if (p.at("delta").get<double>() == config.worst_group_delta) {
        worst_group = p.at("epsilon_hat").get<double>();
      }
    }
    if (worst_group < 0.0) throw Error("report lacks the worst-group delta");
    const Json& interp = report.at("interpretable_worst");
    summary += format_double(cell.alpha) + "," + std::to_string(cell.seed) + "," +
               format_double(report.at("sharpness").at("mean_nll").get<double>()) + "," +
               format_double(report.at("sharpness").at("mean_sigma").get<double>()) + "," +
               format_double(worst_group) + "," +
               (interp.is_null() ? std::string() : format_double(interp.at("error").get<double>())) +
               "\n";
  }
  write_text_file(dir / "summary.csv", summary);
  out << "wrote " << (dir / "summary.csv").string() << " (" << cells.size() << " runs)\n";
}

// ---- simulate / markov -----------------------------------------------------

Forecaster load_forecaster(const std::string& checkpoint, const std::string& oracle) {
  if (!checkpoint.empty() && !oracle.empty()) {
    throw ConfigError("--checkpoint and --oracle are mutually exclusive");
  }
  if (!oracle.empty()) {
    require_file(oracle, "--oracle");
    Json j = read_json_file(oracle);
    // Accept either a bare generator spec or the generator.json written by gen.
    if (j.is_object() && j.contains("spec")) j = j.at("spec");
    return Forecaster::oracle(generator_spec_from_json(j));
  }
  require_file(checkpoint, "--checkpoint");
  return load_checkpoint(checkpoint);
}

struct SimulateArgs {
  std::string checkpoint;
  std::string oracle;
  std::string stream;
  std::string target = "y";
  std::string config;
  std::string generator;
  std::optional<double> y0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  require_file(a.stream, "--stream");
  BankGameConfig config;
  bool have_y0 = false;
  if (!a.config.empty()) {
    const Json j = read_json_file(a.config);
    config = bank_game_config_from_json(j);
    have_y0 = j.contains("y0");
  }
  if (!a.generator.empty()) {
    require_file(a.generator, "--generator");
    const Json meta = read_json_file(a.generator);
    if (!meta.is_object() || !meta.contains("y0") || !meta.at("y0").is_number()) {
      throw ConfigError("--generator: file has no numeric y0");
    }
    config.y0 = meta.at("y0").get<double>();
    have_y0 = true;
  }
  if (a.y0) {
    config.y0 = *a.y0;
    have_y0 = true;
  }
  if (!have_y0) throw ConfigError("y0: give --y0, --generator or a config with y0");
  if (a.seed) config.seed = *a.seed;
  config.validate();

  const Forecaster bank = load_forecaster(a.checkpoint, a.oracle);
  const Dataset stream = load_csv(a.stream, a.target);
  const GameResult result = run_credit_game(bank, stream, config);

  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);
  write_text_file(dir / "game_trace.csv", game_trace_csv(result.trace));
  Json phases = Json::array();
  for (const auto& p : result.phases) phases.push_back(to_json(p));
  write_json_file(dir / "game_summary.json",
                  Json{{"config", to_json(config)}, {"stream_size", stream.size()}, {"phases", phases}});
  for (const auto& p : result.phases) {
    out << to_string(p.phase) << ": mean bank utility " << format_double(p.mean_bank_utility)
        << ", exploit fraction " << format_double(p.exploit_fraction) << "\n";
  }
  out << "wrote " << (dir / "game_summary.json").string() << ", game_trace.csv\n";
}

struct MarkovArgs {
  std::string checkpoint;
  std::string oracle;
  std::string data;
  std::string target = "y";
  std::string config;
  std::vector<double> k;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct MarkovConfig {
  std::vector<double> k{2.0, 4.0, 8.0, 16.0};
  double center = 0.0;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

MarkovConfig markov_config(const std::string& path) {
  MarkovConfig c;
  if (path.empty()) return c;
  const Json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("markov config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "k") {
      if (!value.is_array() || value.empty()) throw ConfigError("k: expected a non-empty array");
      c.k.clear();
      for (const auto& v : value) {
        if (!v.is_number()) throw ConfigError("k: expected numbers");
        c.k.push_back(v.get<double>());
      }
    } else if (key == "center" || key == "scale") {
      if (!value.is_number()) throw ConfigError(key + ": expected a number");
      (key == "center" ? c.center : c.scale) = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("markov config: unknown key '" + key + "'");
    }
  }
  return c;
}

void cmd_markov(const MarkovArgs& a, std::ostream& out) {
  require_file(a.data, "--data");
  MarkovConfig config = markov_config(a.config);
  if (!a.k.empty()) config.k = a.k;
  if (a.seed) config.seed = *a.seed;
  for (double k : config.k) {
    if (!(k > 0.0)) throw ConfigError("k: values must be positive");
  }
  if (!(config.scale > 0.0)) throw ConfigError("scale: must be positive");

  const Forecaster f = load_forecaster(a.checkpoint, a.oracle);
  const Dataset data = load_csv(a.data, a.target);
  const MonotonicLossSpec loss = exponential_pair_loss(config.center, config.scale);
  Rng rng = Rng(config.seed).child("markov");
  const auto rows = markov_check(f, data, loss, config.k, rng);

  const fs::path dir = output_dir(a.out);
  fs::create_directories(dir);
  write_text_file(dir / "markov.csv", markov_csv(rows));
  Json table = Json::array();
  for (const auto& r : rows) table.push_back(to_json(r));
  write_json_file(dir / "markov.json",
                  Json{{"loss", {{"kind", "exponential-pair"},
                                 {"center", config.center},
                                 {"scale", config.scale}}},
                       {"seed", config.seed},
                       {"rows", table}});
  for (const auto& r : rows) {
    out << "k=" << format_double(r.k) << " empirical " << format_double(r.empirical) << " (1/k "
        << format_double(r.bound_paic) << ", 2/k " << format_double(r.bound_avg) << ")\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Individually calibrated regression forecasters", "indcal"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset and split it");
  g->add_option("--kind", gen.kind, "toy, heteroscedastic or credit");
  g->add_option("--n", gen.n, "Number of rows");
  g->add_option("--dim", gen.dim, "Feature dimension");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--noise", gen.noise, "Label noise scale (toy, credit)");
  g->add_option("--config", gen.config, "Generator spec JSON");
  g->add_option("--split", gen.fractions, "Train,val,test fractions")->delimiter(',');
  g->add_option("--out", gen.out, "Output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a randomized forecaster");
  t->add_option("--train", tr.train, "Training CSV");
  t->add_option("--val", tr.val, "Validation CSV (early stopping)");
  t->add_option("--heldout", tr.heldout, "CSV for the certificate (default: --val)");
  t->add_option("--target", tr.target, "Label column");
  t->add_option("--config", tr.config, "Training config JSON");
  t->add_option("--alpha", tr.alpha, "NLL weight in [0,1]");
  t->add_option("--seed", tr.seed, "Training seed");
  t->add_option("--epochs", tr.epochs, "Maximum epochs");
  t->add_option("--epsilon", tr.epsilon, "Certificate epsilon");
  t->add_option("--gamma", tr.gamma, "Certificate failure probability");
  t->add_flag("--verbose", tr.verbose, "Print per-epoch losses");
  t->add_option("--out", tr.out, "Output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate calibration and sharpness");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON");
  e->add_option("--data", ev.data, "Evaluation CSV");
  e->add_option("--val", ev.val, "Validation CSV for --recalibrate");
  e->add_option("--target", ev.target, "Label column");
  e->add_option("--config", ev.config, "Evaluation options JSON");
  e->add_option("--deltas", ev.deltas, "Group size fractions")->delimiter(',');
  e->add_option("--seed", ev.seed, "Evaluation seed");
  e->add_flag("--recalibrate", ev.recalibrate, "Also evaluate an isotonic recalibration");
  e->add_option("--out", ev.out, "Output directory");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train and evaluate an alpha x seed grid");
  s->add_option("--train", sw.train, "Training CSV");
  s->add_option("--val", sw.val, "Validation CSV");
  s->add_option("--test", sw.test, "Test CSV");
  s->add_option("--target", sw.target, "Label column");
  s->add_option("--config", sw.config, "Sweep config JSON");
  s->add_option("--alphas", sw.alphas, "Alpha grid")->delimiter(',');
  s->add_option("--seeds", sw.seeds, "Use seeds 0..N-1");
  s->add_option("--jobs", sw.jobs, "Cells run concurrently");
  s->add_option("--out", sw.out, "Output directory");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Run the credit game");
  m->add_option("--checkpoint", sim.checkpoint, "Bank forecaster checkpoint");
  m->add_option("--oracle", sim.oracle, "Use the true law of this generator as the bank");
  m->add_option("--stream", sim.stream, "Customer stream CSV");
  m->add_option("--target", sim.target, "Label column");
  m->add_option("--config", sim.config, "Game config JSON");
  m->add_option("--generator", sim.generator, "generator.json from gen (supplies y0)");
  m->add_option("--y0", sim.y0, "Credit threshold");
  m->add_option("--seed", sim.seed, "Game seed");
  m->add_option("--out", sim.out, "Output directory");

  MarkovArgs mk;
  auto* k = app.add_subcommand("markov", "Check the Markov bounds for a monotone loss");
  k->add_option("--checkpoint", mk.checkpoint, "Forecaster checkpoint");
  k->add_option("--oracle", mk.oracle, "Use the true law of this generator");
  k->add_option("--data", mk.data, "Evaluation CSV");
  k->add_option("--target", mk.target, "Label column");
  k->add_option("--config", mk.config, "Markov config JSON");
  k->add_option("--k", mk.k, "Multipliers")->delimiter(',');
  k->add_option("--seed", mk.seed, "Seed");
  k->add_option("--out", mk.out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  try {
    if (g->parsed()) cmd_gen(gen, out);
    if (t->parsed()) cmd_train(tr, out, err);
    if (e->parsed()) cmd_eval(ev, out);
    if (s->parsed()) cmd_sweep(sw, out, err);
    if (m->parsed()) cmd_simulate(sim, out);
    if (k->parsed()) cmd_markov(mk, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const ParseError& ex) {
    err << "parse error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace indcal::cli
