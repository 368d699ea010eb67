#include "bayescop/chain_io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "bayescop/corr_param.hpp"
#include "bayescop/error.hpp"

namespace bayescop {

namespace {

constexpr const char* kMagic = "# bayescop-chain 1";

std::string pair_label(std::size_t t, std::size_t s) { return std::to_string(t + 1) + "." + std::to_string(s + 1); }

std::string copula_kind_name(CopulaKind k) { return k == CopulaKind::Gaussian ? "gaussian" : "dvine"; }

void append_number(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line.push_back('\t');
  line += buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& field, int line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ChainFileError("line " + std::to_string(line_no) + ": malformed number '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<std::vector<std::string>> ChainLayout::param_names() const {
  std::vector<std::vector<std::string>> out;
  for (auto f : margins) out.push_back(margin_param_names(f));
  return out;
}

std::vector<std::string> ChainLayout::column_names() const {
  std::vector<std::string> cols = {"sweep", "retained", "log_likelihood"};
  const auto names = param_names();
  for (std::size_t j = 0; j < margins.size(); ++j) {
    for (const auto& n : names[j]) cols.push_back("m" + std::to_string(j + 1) + "." + n);
  }
  const auto order = pair_order(copula.dim);
  for (const char* prefix : {"param.", "latent.", "gamma."}) {
    for (const auto& [t, s] : order) cols.push_back(prefix + pair_label(t, s));
  }
  if (correlation) {
    for (const auto& [t, s] : order) cols.push_back("corr." + pair_label(t, s));
  }
  for (std::size_t b = 0; b < accepted; ++b) cols.push_back("acc." + std::to_string(b + 1));
  for (std::size_t i = 0; i < latent_rows; ++i) {
    for (std::size_t j = 0; j < copula.dim; ++j) cols.push_back("x." + std::to_string(i + 1) + "." + std::to_string(j + 1));
  }
  return cols;
}

CopulaDescription describe_copula(const FitTask& task) {
  return {task.copula.kind, task.copula.kind == CopulaKind::DVine ? task.copula.family : PairFamily::Gaussian,
          task.dim()};
}

ChainLayout layout_for(const FitTask& task, std::uint64_t config_hash) {
  ChainLayout l;
  l.config_hash = config_hash;
  l.copula = describe_copula(task);
  l.pairs = pair_count(task.dim());
  std::size_t blocks = 0;
  for (const auto& spec : task.margins) {
    l.margins.push_back(spec.family);
    const std::size_t np = margin_param_names(spec.family).size();
    l.theta_counts.push_back(np);
    std::size_t free = 0;
    for (std::size_t p = 0; p < np; ++p) free += (p < spec.fixed.size() && spec.fixed[p]) ? 0 : 1;
    const std::size_t cap = std::max<std::size_t>(1, task.mcmc.block_cap);
    blocks += (free + cap - 1) / cap;
  }
  l.accepted = blocks + l.pairs;
  l.correlation = task.copula.kind == CopulaKind::Gaussian || task.copula.family == PairFamily::Gaussian ||
                  task.copula.family == PairFamily::Independence;
  l.latent_rows = task.discrete() && task.mcmc.store_latents ? static_cast<std::size_t>(task.data.rows()) : 0;
  return l;
}

std::string format_record(const ChainLayout& layout, const SweepRecord& r) {
  std::string line = std::to_string(r.sweep) + "\t" + (r.retained ? "1" : "0");
  append_number(line, r.log_likelihood);
  for (std::size_t j = 0; j < layout.margins.size(); ++j) {
    for (std::size_t p = 0; p < layout.theta_counts[j]; ++p) append_number(line, r.theta[j][p]);
  }
  for (double v : r.params) append_number(line, v);
  for (double v : r.latent_params) append_number(line, v);
  for (auto g : r.gamma) line += g ? "\t1" : "\t0";
  if (layout.correlation) {
    for (double v : r.correlation) append_number(line, v);
  }
  for (auto a : r.accepted) line += a ? "\t1" : "\t0";
  if (layout.latent_rows > 0) {
    for (Eigen::Index i = 0; i < r.latents.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.latents.cols(); ++j) append_number(line, r.latents(i, j));
    }
  }
  line.push_back('\n');
  return line;
}

ChainWriter::ChainWriter(const std::filesystem::path& path, ChainLayout layout) : layout_(std::move(layout)) {
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw ConfigError("cannot write chain file " + path.string());
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(layout_.config_hash));
  out_ << kMagic << '\n';
  out_ << "# config_hash " << hash << '\n';
  out_ << "# dimension " << layout_.copula.dim << '\n';
  out_ << "# copula " << copula_kind_name(layout_.copula.kind) << ' ' << to_string(layout_.copula.family) << '\n';
  out_ << "# margins";
  for (std::size_t j = 0; j < layout_.margins.size(); ++j) out_ << (j ? "," : " ") << to_string(layout_.margins[j]);
  out_ << '\n';
  out_ << "# layout correlation=" << (layout_.correlation ? 1 : 0) << " accepted=" << layout_.accepted
       << " latents=" << layout_.latent_rows << '\n';
  const auto cols = layout_.column_names();
  for (std::size_t k = 0; k < cols.size(); ++k) out_ << (k ? "\t" : "") << cols[k];
  out_ << '\n';
}

void ChainWriter::write(const SweepRecord& record) { out_ << format_record(layout_, record); }

void ChainWriter::close() { out_.close(); }

ChainData read_chain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ChainFileError("cannot open chain file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  ChainData data;
  ChainLayout& l = data.layout;
  const std::string name = path.filename().string();
  std::vector<std::string> lines;
  std::size_t start = 0;
  bool truncated = false;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      truncated = true;
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || lines[0] != kMagic) throw ChainFileError(name + ": line 1: not a chain file");

  std::size_t idx = 1;
  bool have_dim = false;
  bool have_layout = false;
  for (; idx < lines.size() && !lines[idx].empty() && lines[idx][0] == '#'; ++idx) {
    std::istringstream hs(lines[idx].substr(1));
    std::string key;
    hs >> key;
    const std::string where = name + ": line " + std::to_string(idx + 1);
    try {
      if (key == "config_hash") {
        std::string hex;
        hs >> hex;
        l.config_hash = std::stoull(hex, nullptr, 16);
      } else if (key == "dimension") {
        hs >> l.copula.dim;
        have_dim = true;
      } else if (key == "copula") {
        std::string kind, family;
        hs >> kind >> family;
        if (kind != "gaussian" && kind != "dvine") throw ChainFileError(where + ": unknown copula '" + kind + "'");
        l.copula.kind = kind == "gaussian" ? CopulaKind::Gaussian : CopulaKind::DVine;
        l.copula.family = pair_family_from_string(family);
      } else if (key == "margins") {
        std::string list;
        hs >> list;
        std::stringstream ls(list);
        std::string item;
        while (std::getline(ls, item, ',')) {
          l.margins.push_back(margin_family_from_string(item));
          l.theta_counts.push_back(margin_param_names(l.margins.back()).size());
        }
      } else if (key == "layout") {
        std::string kv;
        while (hs >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw ChainFileError(where + ": malformed layout");
          const std::string k = kv.substr(0, eq);
          const auto v = static_cast<std::size_t>(std::stoull(kv.substr(eq + 1)));
          if (k == "correlation") {
            l.correlation = v != 0;
          } else if (k == "accepted") {
            l.accepted = v;
          } else if (k == "latents") {
            l.latent_rows = v;
          }
        }
        have_layout = true;
      }
    } catch (const ChainFileError&) {
      throw;
    } catch (const std::exception& e) {
      throw ChainFileError(where + ": malformed header (" + e.what() + ")");
    }
  }
  if (!have_dim || !have_layout || l.margins.size() != l.copula.dim) {
    throw ChainFileError(name + ": incomplete header");
  }
  l.pairs = pair_count(l.copula.dim);
  const auto cols = l.column_names();
  if (idx >= lines.size() || split_tabs(lines[idx]) != cols) {
    throw ChainFileError(name + ": line " + std::to_string(idx + 1) + ": column header does not match the layout");
  }
  ++idx;

  const std::size_t m = l.copula.dim;
  for (; idx < lines.size(); ++idx) {
    const int line_no = static_cast<int>(idx + 1);
    const bool last = idx + 1 == lines.size();
    if (last && truncated) {
      data.warnings.push_back(name + ": line " + std::to_string(line_no) + ": truncated final record dropped");
      break;
    }
    const auto fields = split_tabs(lines[idx]);
    if (fields.size() != cols.size()) {
      throw ChainFileError(name + ": line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                           " fields, found " + std::to_string(fields.size()));
    }
    SweepRecord r;
    std::size_t f = 0;
    const auto next = [&]() { return parse_number(fields[f++], line_no); };
    const auto flag = [&]() {
      const double v = next();
      if (v != 0.0 && v != 1.0) {
        throw ChainFileError(name + ": line " + std::to_string(line_no) + ": flag field is not 0 or 1");
      }
      return static_cast<std::uint8_t>(v);
    };
    r.sweep = static_cast<std::size_t>(next());
    r.retained = flag() != 0;
    r.log_likelihood = next();
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> th;
      for (std::size_t p = 0; p < l.theta_counts[j]; ++p) th.push_back(next());
      r.theta.push_back(std::move(th));
    }
    for (std::size_t k = 0; k < l.pairs; ++k) r.params.push_back(next());
    for (std::size_t k = 0; k < l.pairs; ++k) r.latent_params.push_back(next());
    for (std::size_t k = 0; k < l.pairs; ++k) r.gamma.push_back(flag());
    if (l.correlation) {
      for (std::size_t k = 0; k < l.pairs; ++k) r.correlation.push_back(next());
    }
    for (std::size_t b = 0; b < l.accepted; ++b) r.accepted.push_back(flag());
    if (l.latent_rows > 0) {
      r.latents.resize(static_cast<Eigen::Index>(l.latent_rows), static_cast<Eigen::Index>(m));
      for (Eigen::Index i = 0; i < r.latents.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.latents.cols(); ++j) r.latents(i, j) = next();
      }
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

}  // namespace bayescop
