#include "indcal/serialization.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "indcal/errors.hpp"

namespace indcal {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << f.rdbuf();
  const std::string text = buffer.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line / column pair.
    long line = 1;
    long column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) +
                         ": invalid JSON",
                     line, column);
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

using FieldReader = std::function<void(const Json&)>;

void read_object(const Json& j, const std::string& context,
                 const std::map<std::string, FieldReader>& fields) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(context + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(context + "." + key + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ConfigError(context + "." + key + ": " + e.what());
    }
  }
}

double as_number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

std::size_t as_count(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError(key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError(key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string as_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> as_counts(const Json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(as_count(e, key));
  return out;
}

}  // namespace

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  read_object(j, "train config",
              {
                  {"alpha", [&](const Json& v) { c.alpha = as_number(v, "alpha"); }},
                  {"epochs", [&](const Json& v) { c.epochs = as_count(v, "epochs"); }},
                  {"batch_size", [&](const Json& v) { c.batch_size = as_count(v, "batch_size"); }},
                  {"learning_rate",
                   [&](const Json& v) { c.learning_rate = as_number(v, "learning_rate"); }},
                  {"seed", [&](const Json& v) { c.seed = as_u64(v, "seed"); }},
                  {"patience", [&](const Json& v) { c.patience = as_count(v, "patience"); }},
                  {"sigma_floor",
                   [&](const Json& v) { c.sigma_floor = as_number(v, "sigma_floor"); }},
                  {"hidden", [&](const Json& v) { c.hidden = as_counts(v, "hidden"); }},
              });
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"alpha", c.alpha},           {"epochs", c.epochs},
              {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
              {"seed", c.seed},             {"patience", c.patience},
              {"sigma_floor", c.sigma_floor}, {"hidden", c.hidden}};
}

GeneratorSpec generator_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("generator spec: expected a JSON object");
  GeneratorSpec s = default_heteroscedastic_spec();
  if (j.contains("kind")) {
    switch (parse_generator_kind(as_string(j.at("kind"), "kind"))) {
      case GeneratorKind::kToy: s = default_toy_spec(); break;
      case GeneratorKind::kHeteroscedastic: s = default_heteroscedastic_spec(); break;
      case GeneratorKind::kCredit: s = default_credit_spec(); break;
    }
  }
  read_object(
      j, "generator spec",
      {
          {"kind", [](const Json&) {}},
          {"n", [&](const Json& v) { s.n = as_count(v, "n"); }},
          {"dim", [&](const Json& v) { s.dim = as_count(v, "dim"); }},
          {"seed", [&](const Json& v) { s.seed = as_u64(v, "seed"); }},
          {"noise", [&](const Json& v) { s.noise = as_number(v, "noise"); }},
          {"region_fraction",
           [&](const Json& v) { s.region_fraction = as_number(v, "region_fraction"); }},
          {"credit_quantile",
           [&](const Json& v) { s.credit_quantile = as_number(v, "credit_quantile"); }},
          {"groups",
           [&](const Json& v) {
             if (!v.is_array()) throw ConfigError("groups: expected an array");
             s.groups.clear();
             for (const auto& g : v) {
               SubgroupSpec sub;
               read_object(g, "groups[]",
                           {
                               {"mean_shift",
                                [&](const Json& e) { sub.mean_shift = as_number(e, "mean_shift"); }},
                               {"noise_scale",
                                [&](const Json& e) {
                                  sub.noise_scale = as_number(e, "noise_scale");
                                }},
                               {"shape",
                                [&](const Json& e) {
                                  sub.shape = parse_noise_shape(as_string(e, "shape"));
                                }},
                           });
               s.groups.push_back(sub);
             }
           }},
      });
  s.validate();
  return s;
}

Json to_json(const GeneratorSpec& s) {
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    groups.push_back(
        {{"mean_shift", g.mean_shift}, {"noise_scale", g.noise_scale}, {"shape", to_string(g.shape)}});
  }
  return Json{{"kind", to_string(s.kind)},
              {"n", s.n},
              {"dim", s.dim},
              {"seed", s.seed},
              {"noise", s.noise},
              {"region_fraction", s.region_fraction},
              {"credit_quantile", s.credit_quantile},
              {"groups", groups}};
}

PsiConfig psi_config_from_json(const Json& j) {
  PsiConfig c;
  read_object(j, "psi",
              {
                  {"hidden", [&](const Json& v) { c.hidden = as_counts(v, "hidden"); }},
                  {"learning_rate",
                   [&](const Json& v) { c.learning_rate = as_number(v, "learning_rate"); }},
                  {"steps_per_refit",
                   [&](const Json& v) { c.steps_per_refit = as_count(v, "steps_per_refit"); }},
                  {"batch_size", [&](const Json& v) { c.batch_size = as_count(v, "batch_size"); }},
              });
  return c;
}

Json to_json(const PsiConfig& c) {
  return Json{{"hidden", c.hidden},
              {"learning_rate", c.learning_rate},
              {"steps_per_refit", c.steps_per_refit},
              {"batch_size", c.batch_size}};
}

EvalOptions eval_options_from_json(const Json& j) {
  EvalOptions o;
  read_object(
      j, "eval options",
      {
          {"deltas",
           [&](const Json& v) {
             if (!v.is_array() || v.empty()) throw ConfigError("deltas: expected a non-empty array");
             o.adversarial.deltas.clear();
             for (const auto& e : v) {
               const double d = as_number(e, "deltas");
               if (!(d > 0.0 && d <= 1.0)) throw ConfigError("deltas: values must lie in (0,1]");
               o.adversarial.deltas.push_back(d);
             }
           }},
          {"exhaustive_max_n",
           [&](const Json& v) {
             o.adversarial.exhaustive_max_n = as_count(v, "exhaustive_max_n");
           }},
          {"epsilon", [&](const Json& v) { o.epsilon = as_number(v, "epsilon"); }},
          {"gamma", [&](const Json& v) { o.gamma = as_number(v, "gamma"); }},
          {"monotone_grid", [&](const Json& v) { o.monotone_grid = as_count(v, "monotone_grid"); }},
          {"monotone_rows", [&](const Json& v) { o.monotone_rows = as_count(v, "monotone_rows"); }},
          {"stratified_draws",
           [&](const Json& v) { o.stratified_draws = as_count(v, "stratified_draws"); }},
          {"min_group_size",
           [&](const Json& v) { o.min_group_size = as_count(v, "min_group_size"); }},
      });
  if (!(o.epsilon >= 0.0 && o.epsilon <= 1.0)) throw ConfigError("epsilon: must lie in [0,1]");
  if (!(o.gamma > 0.0 && o.gamma < 1.0)) throw ConfigError("gamma: must lie in (0,1)");
  if (o.monotone_grid < 3) throw ConfigError("monotone_grid: must be at least 3");
  return o;
}

Json to_json(const EvalOptions& o) {
  return Json{{"deltas", o.adversarial.deltas},
              {"exhaustive_max_n", o.adversarial.exhaustive_max_n},
              {"epsilon", o.epsilon},
              {"gamma", o.gamma},
              {"monotone_grid", o.monotone_grid},
              {"monotone_rows", o.monotone_rows},
              {"stratified_draws", o.stratified_draws},
              {"min_group_size", o.min_group_size}};
}

BankGameConfig bank_game_config_from_json(const Json& j) {
  BankGameConfig c;
  read_object(
      j, "game config",
      {
          {"y0", [&](const Json& v) { c.y0 = as_number(v, "y0"); }},
          {"bank",
           [&](const Json& v) {
             read_object(v, "bank",
                         {
                             {"yes_qualified",
                              [&](const Json& e) { c.bank.yes_qualified = as_number(e, "yes_qualified"); }},
                             {"yes_unqualified",
                              [&](const Json& e) {
                                c.bank.yes_unqualified = as_number(e, "yes_unqualified");
                              }},
                             {"no", [&](const Json& e) { c.bank.no = as_number(e, "no"); }},
                         });
           }},
          {"customer",
           [&](const Json& v) {
             read_object(v, "customer",
                         {
                             {"yes_qualified",
                              [&](const Json& e) {
                                c.customer.yes_qualified = as_number(e, "yes_qualified");
                              }},
                             {"yes_unqualified",
                              [&](const Json& e) {
                                c.customer.yes_unqualified = as_number(e, "yes_unqualified");
                              }},
                             {"no", [&](const Json& e) { c.customer.no = as_number(e, "no"); }},
                         });
           }},
          {"refit_interval",
           [&](const Json& v) { c.refit_interval = as_count(v, "refit_interval"); }},
          {"psi", [&](const Json& v) { c.psi = psi_config_from_json(v); }},
          {"seed", [&](const Json& v) { c.seed = as_u64(v, "seed"); }},
      });
  c.validate();
  return c;
}

Json to_json(const BankGameConfig& c) {
  return Json{{"y0", c.y0},
              {"bank",
               {{"yes_qualified", c.bank.yes_qualified},
                {"yes_unqualified", c.bank.yes_unqualified},
                {"no", c.bank.no}}},
              {"customer",
               {{"yes_qualified", c.customer.yes_qualified},
                {"yes_unqualified", c.customer.yes_unqualified},
                {"no", c.customer.no}}},
              {"refit_interval", c.refit_interval},
              {"psi", to_json(c.psi)},
              {"seed", c.seed}};
}

Json checkpoint_to_json(const Forecaster& f, const std::optional<TrainConfig>& config) {
  Json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"kind", to_string(f.kind())}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrainedModel>) {
          const MlpLayout& layout = m.params.layout();
          j["layout"] = {{"input_dim", layout.input_dim},
                         {"hidden", layout.hidden},
                         {"output_dim", layout.output_dim},
                         {"seed_input", layout.seed_input}};
          j["weights"] = std::vector<double>(m.params.values().begin(), m.params.values().end());
          j["sigma_floor"] = m.sigma_floor;
          j["standardization"] = {{"mean", m.standardization.mean},
                                  {"scale", m.standardization.scale}};
          if (config) j["train_config"] = to_json(*config);
        } else if constexpr (std::is_same_v<T, OracleModel>) {
          throw ConfigError("oracle forecasters cannot be saved");
        } else if constexpr (std::is_same_v<T, PassThroughModel>) {
          j["c"] = m.c;
        } else {
          j["inner"] = checkpoint_to_json(*m.inner, config);
          Json knots = Json::array();
          for (const auto& k : m.map->knots()) knots.push_back({k.input, k.output});
          j["knots"] = knots;
        }
      },
      f.model());
  return j;
}

namespace {

void check_header(const Json& j) {
  if (!j.is_object()) throw ParseError("checkpoint: expected a JSON object");
  if (j.value("format", std::string()) != kCheckpointFormat) {
    throw ParseError("checkpoint: missing or wrong format tag");
  }
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version");
  }
}

}  // namespace

Forecaster checkpoint_from_json(const Json& j) {
  check_header(j);
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "trained") {
      const Json& l = j.at("layout");
      MlpLayout layout;
      layout.input_dim = l.at("input_dim").get<std::size_t>();
      layout.hidden = l.at("hidden").get<std::vector<std::size_t>>();
      layout.output_dim = l.at("output_dim").get<std::size_t>();
      layout.seed_input = l.at("seed_input").get<bool>();
      MlpParams params(layout, j.at("weights").get<std::vector<double>>());
      Standardization record;
      record.mean = j.at("standardization").at("mean").get<std::vector<double>>();
      record.scale = j.at("standardization").at("scale").get<std::vector<double>>();
      return Forecaster::trained(std::move(params), std::move(record),
                                 j.at("sigma_floor").get<double>());
    }
    if (kind == "pass-through") return Forecaster::pass_through(j.at("c").get<double>());
    if (kind == "recalibrated") {
      std::vector<Knot> knots;
      for (const auto& k : j.at("knots")) {
        knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
      }
      return Forecaster::recalibrated(checkpoint_from_json(j.at("inner")),
                                      MonotoneStepFn(std::move(knots)));
    }
    throw ParseError("checkpoint: unknown kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

std::optional<TrainConfig> checkpoint_train_config(const Json& j) {
  check_header(j);
  if (j.contains("train_config")) return train_config_from_json(j.at("train_config"));
  if (j.contains("inner")) return checkpoint_train_config(j.at("inner"));
  return std::nullopt;
}

void save_checkpoint(const std::filesystem::path& path, const Forecaster& f,
                     const std::optional<TrainConfig>& config) {
  write_json_file(path, checkpoint_to_json(f, config));
}

Forecaster load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

Json to_json(const MpaicCertificate& c) {
  return Json{{"epsilon", c.epsilon},
              {"empirical_violation", c.empirical_violation},
              {"gamma", c.gamma},
              {"n", c.n},
              {"bound", c.bound}};
}

Json to_json(const PaicConversion& c) {
  return Json{{"epsilon", c.epsilon},
              {"delta", c.delta},
              {"epsilon_prime", c.epsilon_prime},
              {"delta_paic", c.delta_paic}};
}

Json to_json(const GroupSpec& g) {
  Json j{{"kind", to_string(g.kind)},
         {"name", g.name},
         {"size", g.members.size()},
         {"size_fraction", g.size_fraction}};
  if (!g.conditions.empty()) {
    Json conds = Json::array();
    for (const auto& c : g.conditions) {
      conds.push_back({{"feature", c.feature}, {"threshold", c.threshold}, {"above", c.above}});
    }
    j["conditions"] = conds;
  }
  if (g.kind == GroupKind::kWindow) {
    j["ordering"] = g.ordering;
    j["rank_begin"] = g.rank_begin;
    j["rank_end"] = g.rank_end;
  }
  return j;
}

Json to_json(const CalibrationReport& r) {
  Json curve = Json::array();
  for (const auto& p : r.adversarial_curve) {
    curve.push_back(
        {{"delta", p.delta}, {"epsilon_hat", p.epsilon_hat}, {"witness", to_json(p.witness)}});
  }
  Json groups = Json::array();
  for (const auto& g : r.interpretable) {
    groups.push_back({{"group", to_json(g.group)}, {"error", g.error}});
  }
  Json j{{"n", r.n},
         {"average_w1", r.average_w1},
         {"average_ece", r.average_ece},
         {"adversarial_curve", curve},
         {"adversarial_search", "heuristic-lower-bound"},
         {"min_group_size", r.min_group_size},
         {"interpretable_groups", groups},
         {"sharpness", {{"mean_nll", r.sharpness.mean_nll}, {"mean_sigma", r.sharpness.mean_sigma}}},
         {"mpaic", to_json(r.mpaic)},
         {"monotone_fraction", r.monotone_fraction}};
  j["average_w1_stratified"] =
      r.average_w1_stratified ? Json(*r.average_w1_stratified) : Json(nullptr);
  j["interpretable_worst"] =
      r.interpretable_worst
          ? Json{{"group", to_json(r.interpretable_worst->group)},
                 {"error", r.interpretable_worst->error}}
          : Json(nullptr);
  return j;
}

Json to_json(const PhaseSummary& s) {
  return Json{{"phase", to_string(s.phase)},
              {"arrivals", s.arrivals},
              {"applications", s.applications},
              {"approvals", s.approvals},
              {"unqualified_approvals", s.unqualified_approvals},
              {"exploits", s.exploits},
              {"bank_total", s.bank_total},
              {"customer_total", s.customer_total},
              {"mean_bank_utility", s.mean_bank_utility},
              {"mean_bank_utility_per_round", s.mean_bank_utility_per_round},
              {"exploit_fraction", s.exploit_fraction},
              {"unqualified_approval_fraction", s.unqualified_approval_fraction}};
}

Json to_json(const MarkovRow& row) {
  return Json{{"k", row.k},
              {"n", row.n},
              {"exceed", row.exceed},
              {"empirical", row.empirical},
              {"bound_avg", row.bound_avg},
              {"bound_paic", row.bound_paic},
              {"binomial_sigma", row.binomial_sigma}};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_paic,train_nll,train_combined,val_paic,val_nll,val_combined\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch);
    for (double v : {e.train.paic, e.train.nll, e.train.combined, e.val.paic, e.val.nll,
                     e.val.combined}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "delta,epsilon_hat,witness,witness_size\n";
  for (const auto& p : curve) {
    out += format_double(p.delta) + "," + format_double(p.epsilon_hat) + "," +
           csv_field(p.witness.name) + "," + std::to_string(p.witness.members.size()) + "\n";
  }
  return out;
}

std::string groups_csv(const std::vector<GroupError>& groups) {
  std::string out = "group,size,error\n";
  for (const auto& g : groups) {
    out += csv_field(g.group.name) + "," + std::to_string(g.group.members.size()) + "," +
           format_double(g.error) + "\n";
  }
  return out;
}

std::string game_trace_csv(const std::vector<GameRound>& trace) {
  std::string out =
      "phase,round,y,psi,applied,approved,bank_utility,customer_utility,exploit\n";
  for (const auto& r : trace) {
    out += to_string(r.phase) + "," + std::to_string(r.round) + "," + format_double(r.y) + "," +
           format_double(r.psi) + "," + (r.applied ? "1" : "0") + "," + (r.approved ? "1" : "0") +
           "," + format_double(r.bank_utility) + "," + format_double(r.customer_utility) + "," +
           (r.exploit ? "1" : "0") + "\n";
  }
  return out;
}

std::string markov_csv(const std::vector<MarkovRow>& rows) {
  std::string out = "k,empirical,bound_avg,bound_paic\n";
  for (const auto& r : rows) {
    out += format_double(r.k) + "," + format_double(r.empirical) + "," + format_double(r.bound_avg) +
           "," + format_double(r.bound_paic) + "\n";
  }
  return out;
}

}  // namespace indcal
