#include "bayescop/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "bayescop/error.hpp"

namespace bayescop {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : -1; }

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& section) {
  if (!node.IsMap()) throw ConfigError(section + " must be a mapping", line_of(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + section, line_of(kv.first));
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for " + what, line_of(node));
  }
}

std::size_t count(const YAML::Node& node, const std::string& what) {
  const auto v = scalar<long long>(node, what);
  if (v < 0) throw ConfigError(what + " must be non-negative", line_of(node));
  return static_cast<std::size_t>(v);
}

std::vector<double> doubles(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) throw ConfigError(what + " must be a list", line_of(node));
  std::vector<double> out;
  for (const auto& v : node) out.push_back(scalar<double>(v, what));
  return out;
}

MarginSpec parse_margin(const YAML::Node& node, std::size_t index) {
  const std::string where = "margin " + std::to_string(index + 1);
  check_keys(node, {"family", "params", "fixed"}, where);
  if (!node["family"]) throw ConfigError(where + ": family is required", line_of(node));
  MarginSpec spec;
  try {
    spec.family = margin_family_from_string(scalar<std::string>(node["family"], "family"));
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), line_of(node["family"]));
  }
  if (node["params"]) {
    spec.params = doubles(node["params"], where + " params");
    try {
      if (spec.family != MarginFamily::Empirical) Margin(spec.family, spec.params);
    } catch (const DomainError& e) {
      throw ConfigError(where + ": " + e.what(), line_of(node["params"]));
    }
  }
  if (const auto f = node["fixed"]) {
    if (f.IsScalar()) {
      if (scalar<bool>(f, "fixed")) {
        if (spec.params.empty()) throw ConfigError(where + ": fixed margins need params", line_of(f));
        spec.fixed.assign(spec.params.size(), true);
      }
    } else {
      for (const auto& v : f) spec.fixed.push_back(scalar<bool>(v, "fixed"));
      if (spec.params.empty() || spec.fixed.size() != spec.params.size()) {
        throw ConfigError(where + ": fixed flags need params of the same length", line_of(f));
      }
    }
  }
  return spec;
}

CopulaSpec parse_copula(const YAML::Node& node) {
  check_keys(node, {"type", "family", "parameterisation", "selection", "fixed", "params", "gamma", "prior",
                    "allow_negative_clayton"},
             "copula");
  CopulaSpec c;
  if (const auto t = node["type"]) {
    const auto v = scalar<std::string>(t, "copula type");
    if (v == "gaussian") {
      c.kind = CopulaKind::Gaussian;
    } else if (v == "dvine") {
      c.kind = CopulaKind::DVine;
    } else {
      throw ConfigError("copula type must be gaussian or dvine", line_of(t));
    }
  }
  if (const auto f = node["family"]) {
    try {
      c.family = pair_family_from_string(scalar<std::string>(f, "pair family"));
    } catch (const DomainError& e) {
      throw ConfigError(e.what(), line_of(f));
    }
  }
  if (const auto p = node["parameterisation"]) {
    const auto v = scalar<std::string>(p, "parameterisation");
    if (v == "partials") {
      c.parameterisation = CorrParameterisation::Partials;
    } else if (v == "cholesky") {
      c.parameterisation = CorrParameterisation::Cholesky;
    } else {
      throw ConfigError("parameterisation must be partials or cholesky", line_of(p));
    }
  }
  if (node["selection"]) c.selection = scalar<bool>(node["selection"], "selection");
  if (node["fixed"]) c.fixed = scalar<bool>(node["fixed"], "fixed");
  if (node["allow_negative_clayton"]) {
    c.allow_negative_clayton = scalar<bool>(node["allow_negative_clayton"], "allow_negative_clayton");
  }
  if (node["params"]) c.params = doubles(node["params"], "copula params");
  if (const auto g = node["gamma"]) {
    for (const auto& v : g) {
      const auto b = scalar<int>(v, "gamma");
      if (b != 0 && b != 1) throw ConfigError("indicators must be 0 or 1", line_of(v));
      c.gamma.push_back(static_cast<std::uint8_t>(b));
    }
  }
  // Archimedean pairs default to a normal prior on the proposal scale.
  const bool bounded = c.kind == CopulaKind::Gaussian || c.family == PairFamily::Gaussian;
  if (!bounded) c.slab_prior.kind = SlabPrior::Kind::Normal;
  if (const auto pr = node["prior"]) {
    check_keys(pr, {"slab", "a", "b", "variance", "cholesky_variance"}, "copula prior");
    if (const auto s = pr["slab"]) {
      const auto v = scalar<std::string>(s, "slab prior");
      if (v == "uniform") {
        c.slab_prior.kind = SlabPrior::Kind::Uniform;
      } else if (v == "beta") {
        c.slab_prior.kind = SlabPrior::Kind::Beta;
      } else if (v == "normal") {
        c.slab_prior.kind = SlabPrior::Kind::Normal;
      } else {
        throw ConfigError("slab prior must be uniform, beta or normal", line_of(s));
      }
      if (!bounded && c.slab_prior.kind != SlabPrior::Kind::Normal) {
        throw ConfigError("pair family " + std::string(to_string(c.family)) + " needs a normal slab prior", line_of(s));
      }
    }
    if (pr["a"]) c.slab_prior.a = scalar<double>(pr["a"], "a");
    if (pr["b"]) c.slab_prior.b = scalar<double>(pr["b"], "b");
    if (pr["variance"]) c.slab_prior.variance = scalar<double>(pr["variance"], "variance");
    if (pr["cholesky_variance"]) c.cholesky_prior_var = scalar<double>(pr["cholesky_variance"], "cholesky_variance");
  }
  return c;
}

const char* kind_name(SlabPrior::Kind k) {
  switch (k) {
    case SlabPrior::Kind::Uniform: return "uniform";
    case SlabPrior::Kind::Beta: return "beta";
    case SlabPrior::Kind::Normal: return "normal";
  }
  return "uniform";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping", 1);
  check_keys(root, {"data", "output", "margins", "priors", "copula", "mcmc", "simulate", "summary"}, "configuration");

  RunConfig cfg;
  if (root["data"]) cfg.data = scalar<std::string>(root["data"], "data");
  if (root["output"]) cfg.output = scalar<std::string>(root["output"], "output");

  const auto margins = root["margins"];
  if (!margins || !margins.IsSequence() || margins.size() == 0) {
    throw ConfigError("margins must be a non-empty list", margins ? line_of(margins) : 1);
  }
  for (std::size_t j = 0; j < margins.size(); ++j) cfg.margins.push_back(parse_margin(margins[j], j));

  if (const auto pr = root["priors"]) {
    check_keys(pr, {"location_var", "log_var", "logit_var"}, "priors");
    if (pr["location_var"]) cfg.margin_prior.location_var = scalar<double>(pr["location_var"], "location_var");
    if (pr["log_var"]) cfg.margin_prior.log_var = scalar<double>(pr["log_var"], "log_var");
    if (pr["logit_var"]) cfg.margin_prior.logit_var = scalar<double>(pr["logit_var"], "logit_var");
    if (!(cfg.margin_prior.location_var > 0 && cfg.margin_prior.log_var > 0 && cfg.margin_prior.logit_var > 0)) {
      throw ConfigError("prior variances must be positive", line_of(pr));
    }
  }

  if (const auto c = root["copula"]) cfg.copula = parse_copula(c);

  const auto mc = root["mcmc"];
  if (mc) {
    check_keys(mc, {"sweeps", "burn_in", "thinning", "seed", "chains", "step", "adapt", "adapt_interval",
                    "block_cap", "proposal_df", "proposal_refresh", "store_latents", "prior_only"},
               "mcmc");
    if (mc["sweeps"]) cfg.mcmc.sweeps = count(mc["sweeps"], "sweeps");
    if (mc["burn_in"]) cfg.mcmc.burn_in = count(mc["burn_in"], "burn_in");
    if (mc["thinning"]) cfg.mcmc.thinning = count(mc["thinning"], "thinning");
    if (mc["seed"]) {
      cfg.mcmc.seed = scalar<std::uint64_t>(mc["seed"], "seed");
      cfg.seed_given = true;
    }
    if (mc["chains"]) cfg.chains = count(mc["chains"], "chains");
    if (mc["step"]) cfg.mcmc.rw_step = scalar<double>(mc["step"], "step");
    if (mc["adapt"]) cfg.mcmc.adapt = scalar<bool>(mc["adapt"], "adapt");
    if (mc["adapt_interval"]) cfg.mcmc.adapt_interval = count(mc["adapt_interval"], "adapt_interval");
    if (mc["block_cap"]) cfg.mcmc.block_cap = count(mc["block_cap"], "block_cap");
    if (mc["proposal_df"]) cfg.mcmc.proposal_df = scalar<double>(mc["proposal_df"], "proposal_df");
    if (mc["proposal_refresh"]) cfg.mcmc.proposal_refresh = count(mc["proposal_refresh"], "proposal_refresh");
    if (mc["store_latents"]) cfg.mcmc.store_latents = scalar<bool>(mc["store_latents"], "store_latents");
    if (mc["prior_only"]) cfg.mcmc.prior_only = scalar<bool>(mc["prior_only"], "prior_only");
    if (cfg.mcmc.sweeps == 0) throw ConfigError("sweeps must be positive", line_of(mc["sweeps"]));
    if (cfg.mcmc.burn_in_or_default() > cfg.mcmc.sweeps) {
      throw ConfigError("burn_in exceeds sweeps", line_of(mc["burn_in"] ? mc["burn_in"] : mc));
    }
    if (cfg.mcmc.thinning == 0) throw ConfigError("thinning must be at least 1", line_of(mc["thinning"]));
    if (cfg.chains == 0) throw ConfigError("chains must be at least 1", line_of(mc["chains"]));
    if (!(cfg.mcmc.rw_step > 0.0)) throw ConfigError("step must be positive", line_of(mc["step"]));
  }

  if (const auto sim = root["simulate"]) {
    check_keys(sim, {"rows"}, "simulate");
    if (sim["rows"]) cfg.simulate.rows = count(sim["rows"], "rows");
  }
  if (const auto su = root["summary"]) {
    check_keys(su, {"level", "draws_per_sweep", "inner_draws", "max_records"}, "summary");
    if (su["level"]) {
      cfg.summary.level = scalar<double>(su["level"], "level");
      if (!(cfg.summary.level > 0.0 && cfg.summary.level < 1.0)) {
        throw ConfigError("summary level must lie in (0,1)", line_of(su["level"]));
      }
    }
    if (su["draws_per_sweep"]) cfg.summary.draws_per_sweep = count(su["draws_per_sweep"], "draws_per_sweep");
    if (su["inner_draws"]) cfg.summary.inner_draws = count(su["inner_draws"], "inner_draws");
    if (su["max_records"]) cfg.summary.max_records = count(su["max_records"], "max_records");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  if (!cfg.data.empty()) out << YAML::Key << "data" << YAML::Value << cfg.data;
  if (!cfg.output.empty()) out << YAML::Key << "output" << YAML::Value << cfg.output;

  out << YAML::Key << "margins" << YAML::Value << YAML::BeginSeq;
  for (const auto& m : cfg.margins) {
    out << YAML::BeginMap << YAML::Key << "family" << YAML::Value << std::string(to_string(m.family));
    if (!m.params.empty()) out << YAML::Key << "params" << YAML::Value << YAML::Flow << m.params;
    if (!m.fixed.empty()) {
      out << YAML::Key << "fixed" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (bool b : m.fixed) out << b;
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "priors" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "location_var" << YAML::Value << cfg.margin_prior.location_var;
  out << YAML::Key << "log_var" << YAML::Value << cfg.margin_prior.log_var;
  out << YAML::Key << "logit_var" << YAML::Value << cfg.margin_prior.logit_var;
  out << YAML::EndMap;

  const CopulaSpec& c = cfg.copula;
  out << YAML::Key << "copula" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "type" << YAML::Value << (c.kind == CopulaKind::Gaussian ? "gaussian" : "dvine");
  out << YAML::Key << "family" << YAML::Value << std::string(to_string(c.family));
  out << YAML::Key << "parameterisation" << YAML::Value
      << (c.parameterisation == CorrParameterisation::Partials ? "partials" : "cholesky");
  out << YAML::Key << "selection" << YAML::Value << c.selection;
  out << YAML::Key << "fixed" << YAML::Value << c.fixed;
  out << YAML::Key << "allow_negative_clayton" << YAML::Value << c.allow_negative_clayton;
  if (!c.params.empty()) out << YAML::Key << "params" << YAML::Value << YAML::Flow << c.params;
  if (!c.gamma.empty()) {
    out << YAML::Key << "gamma" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto g : c.gamma) out << static_cast<int>(g);
    out << YAML::EndSeq;
  }
  out << YAML::Key << "prior" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "slab" << YAML::Value << kind_name(c.slab_prior.kind);
  out << YAML::Key << "a" << YAML::Value << c.slab_prior.a;
  out << YAML::Key << "b" << YAML::Value << c.slab_prior.b;
  out << YAML::Key << "variance" << YAML::Value << c.slab_prior.variance;
  out << YAML::Key << "cholesky_variance" << YAML::Value << c.cholesky_prior_var;
  out << YAML::EndMap << YAML::EndMap;

  const McmcSettings& mc = cfg.mcmc;
  out << YAML::Key << "mcmc" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sweeps" << YAML::Value << mc.sweeps;
  if (mc.burn_in) out << YAML::Key << "burn_in" << YAML::Value << *mc.burn_in;
  out << YAML::Key << "thinning" << YAML::Value << mc.thinning;
  if (cfg.seed_given) out << YAML::Key << "seed" << YAML::Value << mc.seed;
  out << YAML::Key << "chains" << YAML::Value << cfg.chains;
  out << YAML::Key << "step" << YAML::Value << mc.rw_step;
  out << YAML::Key << "adapt" << YAML::Value << mc.adapt;
  out << YAML::Key << "adapt_interval" << YAML::Value << mc.adapt_interval;
  out << YAML::Key << "block_cap" << YAML::Value << mc.block_cap;
  out << YAML::Key << "proposal_df" << YAML::Value << mc.proposal_df;
  out << YAML::Key << "proposal_refresh" << YAML::Value << mc.proposal_refresh;
  out << YAML::Key << "store_latents" << YAML::Value << mc.store_latents;
  out << YAML::Key << "prior_only" << YAML::Value << mc.prior_only;
  out << YAML::EndMap;

  out << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rows" << YAML::Value << cfg.simulate.rows << YAML::EndMap;

  out << YAML::Key << "summary" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "level" << YAML::Value << cfg.summary.level;
  out << YAML::Key << "draws_per_sweep" << YAML::Value << cfg.summary.draws_per_sweep;
  out << YAML::Key << "inner_draws" << YAML::Value << cfg.summary.inner_draws;
  out << YAML::Key << "max_records" << YAML::Value << cfg.summary.max_records;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace bayescop
