#include "appg/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "appg/errors.hpp"

namespace appg {

namespace pt = boost::property_tree;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> ExperimentConfig::stepsizes() const {
  if (!per_node_gamma.empty()) return per_node_gamma;
  return std::vector<double>(n, gamma.value_or(0.0));
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// The tree itself carries no positions, so keys are located with a light scan
// for diagnostics only.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line, section;
  for (int no = 1; std::getline(in, line); ++no) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      lines.emplace(section, no);
      continue;
    }
    if (const auto eq = t.find('='); eq != std::string::npos) {
      lines.emplace(section + "." + trim(std::string_view(t).substr(0, eq)), no);
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(pt::ptree tree, std::map<std::string, int> lines)
      : tree_(std::move(tree)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? "config" : "config line " + std::to_string(it->second);
    throw ConfigError(where + ": " + key + ": " + what);
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    std::string value = trim(*v);
    // Inline comments.
    if (const auto c = value.find_first_of(";#"); c != std::string::npos) value = trim(value.substr(0, c));
    return value;
  }

  bool has(const std::string& key) { return raw(key).has_value(); }

  std::string str(const std::string& key, std::string fallback) {
    return raw(key).value_or(std::move(fallback));
  }

  template <class T>
  T number(const std::string& key, T fallback) {
    const auto v = raw(key);
    return v ? parse_number<T>(key, *v) : fallback;
  }

  template <class T>
  std::optional<T> optional_number(const std::string& key) {
    const auto v = raw(key);
    if (!v || *v == "none" || v->empty()) return std::nullopt;
    return parse_number<T>(key, *v);
  }

  bool flag(const std::string& key, bool fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    fail(key, "expected true or false, got '" + *v + "'");
  }

  std::vector<double> list(const std::string& key) {
    std::vector<double> out;
    const auto v = raw(key);
    if (!v) return out;
    std::stringstream ss(*v);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number<double>(key, trim(item)));
    return out;
  }

  template <class T>
  T parse_number(const std::string& key, const std::string& text) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(key, "bad number '" + text + "'");
    return value;
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) fail(section, "key outside any section");
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!used_.contains(full)) fail(full, "unknown key");
      }
    }
  }

 private:
  pt::ptree tree_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Reader r(std::move(tree), key_lines(text));
  ExperimentConfig cfg;
  cfg.hash = fnv1a(text);

  try {
    cfg.topology = parse_topology_kind(r.str("topology.kind", "log"));
  } catch (const std::invalid_argument& e) {
    r.fail("topology.kind", e.what());
  }
  cfg.n = r.number<int>("topology.n", 1);
  if (cfg.n < 1) r.fail("topology.n", "must be at least 1");
  if (const auto edges = r.raw("topology.edges_file")) cfg.edges_file = base_dir / *edges;
  if (cfg.topology == TopologyKind::kCustom && cfg.edges_file.empty()) {
    r.fail("topology.kind", "custom topology needs edges_file");
  }

  auto& obj = cfg.objective;
  obj.family = r.str("objective.family", obj.family);
  if (obj.family != "quadratic" && obj.family != "pl_nonconvex" && obj.family != "logistic") {
    r.fail("objective.family", "unknown family '" + obj.family + "'");
  }
  obj.dim = r.number<int>("objective.dim", obj.dim);
  if (obj.dim < 1) r.fail("objective.dim", "must be at least 1");
  obj.seed = r.number<std::uint64_t>("objective.seed", obj.seed);
  obj.condition = r.number<double>("objective.condition", obj.condition);
  if (!(obj.condition >= 1.0)) r.fail("objective.condition", "must be at least 1");
  if (const auto path = r.raw("objective.dataset")) obj.dataset = base_dir / *path;
  obj.label_column = r.number<int>("objective.label_column", obj.label_column);
  obj.has_header = r.flag("objective.has_header", obj.has_header);
  obj.normalize = r.flag("objective.normalize", obj.normalize);
  obj.reg = r.number<double>("objective.reg", obj.reg);
  if (!(obj.reg >= 0.0)) r.fail("objective.reg", "must be nonnegative");
  if (obj.family == "logistic" && obj.dataset.empty()) r.fail("objective.family", "logistic needs a dataset");

  auto& a = cfg.async;
  a.tau_lo = r.number<double>("async.tau_lo", a.tau_lo);
  a.tau_hi = r.number<double>("async.tau_hi", std::max(a.tau_hi, a.tau_lo));
  a.delay_max = r.number<double>("async.delay_max", a.delay_max);
  try {
    a.delay_law = parse_delay_law(r.str("async.delay_law", "uniform"));
  } catch (const std::invalid_argument& e) {
    r.fail("async.delay_law", e.what());
  }
  try {
    a.activation_law = parse_activation_law(r.str("async.activation_law", "uniform"));
  } catch (const std::invalid_argument& e) {
    r.fail("async.activation_law", e.what());
  }
  a.node_gaps = r.list("async.node_gaps");
  a.seed = r.number<std::uint64_t>("async.seed", a.seed);
  a.recency_decay = r.optional_number<double>("async.recency_decay");
  if (const auto slow = r.raw("async.slow_nodes")) {
    std::stringstream ss(*slow);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      const auto colon = item.find(':');
      if (colon == std::string::npos) r.fail("async.slow_nodes", "expected node:extra pairs");
      a.slow_nodes[r.parse_number<int>("async.slow_nodes", trim(item.substr(0, colon)))] =
          r.parse_number<double>("async.slow_nodes", trim(item.substr(colon + 1)));
    }
  }
  if (const auto edge_delays = r.raw("async.edge_delays")) {
    // "from-to:delay" pairs.
    std::stringstream ss(*edge_delays);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      const auto dash = item.find('-');
      const auto colon = item.find(':');
      if (dash == std::string::npos || colon == std::string::npos || colon < dash) {
        r.fail("async.edge_delays", "expected from-to:delay entries");
      }
      const Edge e{r.parse_number<int>("async.edge_delays", trim(item.substr(0, dash))),
                   r.parse_number<int>("async.edge_delays", trim(item.substr(dash + 1, colon - dash - 1)))};
      a.edge_delays[e] = r.parse_number<double>("async.edge_delays", trim(item.substr(colon + 1)));
    }
  }
  try {
    a.validate(cfg.n);
  } catch (const std::invalid_argument& e) {
    r.fail("async.tau_lo", e.what());
  }

  cfg.gamma = r.optional_number<double>("stepsize.gamma");
  cfg.per_node_gamma = r.list("stepsize.per_node");
  if (!cfg.gamma && cfg.per_node_gamma.empty()) r.fail("stepsize", "needs gamma or per_node");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) r.fail("stepsize.gamma", "must be positive");
  if (!cfg.per_node_gamma.empty()) {
    if (static_cast<int>(cfg.per_node_gamma.size()) != cfg.n) {
      r.fail("stepsize.per_node", "needs one value per node");
    }
    for (double v : cfg.per_node_gamma) {
      if (!(v > 0.0)) r.fail("stepsize.per_node", "stepsizes must be positive");
    }
  }

  cfg.init.mode = r.str("init.mode", cfg.init.mode);
  if (cfg.init.mode != "zeros" && cfg.init.mode != "uniform" && cfg.init.mode != "normal" &&
      cfg.init.mode != "constant") {
    r.fail("init.mode", "unknown mode '" + cfg.init.mode + "'");
  }
  cfg.init.scale = r.number<double>("init.scale", cfg.init.scale);
  cfg.init.seed = r.number<std::uint64_t>("init.seed", cfg.init.seed);

  cfg.horizon.max_events = r.number<std::int64_t>("horizon.max_events", cfg.horizon.max_events);
  if (cfg.horizon.max_events < 1) r.fail("horizon.max_events", "must be positive");
  if (r.has("horizon.epsilon")) {
    cfg.horizon.epsilon = r.optional_number<double>("horizon.epsilon");
    if (cfg.horizon.epsilon && !(*cfg.horizon.epsilon > 0.0)) r.fail("horizon.epsilon", "must be positive");
  }

  if (const auto dir = r.raw("output.dir")) cfg.output_dir = base_dir / *dir;
  else cfg.output_dir = base_dir / cfg.output_dir;
  cfg.write_trace = r.flag("output.trace", cfg.write_trace);

  auto& v = cfg.verify;
  v.replay_events = r.number<std::int64_t>("verify.replay_events", v.replay_events);
  v.contraction_t_max = r.number<int>("verify.contraction_t_max", v.contraction_t_max);
  v.contraction_samples = r.number<int>("verify.contraction_samples", v.contraction_samples);
  v.max_contraction_size = r.number<int>("verify.max_contraction_size", v.max_contraction_size);
  v.sync_rounds = r.number<int>("verify.sync_rounds", v.sync_rounds);
  v.contraction_step_samples = r.number<int>("verify.contraction_step_samples", v.contraction_step_samples);
  if (v.replay_events < 1 || v.contraction_samples < 1 || v.sync_rounds < 1 || v.contraction_step_samples < 0) {
    r.fail("verify", "counts must be positive");
  }

  cfg.compare.slow_node = r.number<int>("compare.slow_node", cfg.compare.slow_node);
  cfg.compare.slow_extra = r.number<double>("compare.slow_extra", cfg.compare.slow_extra);
  if (cfg.compare.slow_node < 0 || cfg.compare.slow_node >= cfg.n) r.fail("compare.slow_node", "out of range");
  if (!(cfg.compare.slow_extra >= 0.0)) r.fail("compare.slow_extra", "must be nonnegative");

  r.reject_unknown();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = parse_config(text.str(), path.parent_path().empty() ? "." : path.parent_path());
  cfg.source = path;
  return cfg;
}

}  // namespace appg
