#include "appg/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace appg {

DelayLaw parse_delay_law(std::string_view name) {
  if (name == "uniform") return DelayLaw::kUniform;
  if (name == "constant") return DelayLaw::kConstant;
  if (name == "per_edge") return DelayLaw::kPerEdge;
  throw std::invalid_argument("unknown delay law: " + std::string(name));
}

ActivationLaw parse_activation_law(std::string_view name) {
  if (name == "uniform") return ActivationLaw::kUniform;
  if (name == "constant") return ActivationLaw::kConstant;
  if (name == "per_node") return ActivationLaw::kPerNode;
  throw std::invalid_argument("unknown activation law: " + std::string(name));
}

std::string_view status_name(RunStatus status) {
  switch (status) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kHorizonExhausted: return "horizon_exhausted";
    case RunStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

void AsyncConfig::validate(int n) const {
  if (!(tau_lo > 0.0)) throw std::invalid_argument("tau_lo must be positive");
  if (!(tau_hi >= tau_lo)) throw std::invalid_argument("tau_hi must be >= tau_lo");
  if (!(delay_max >= 0.0)) throw std::invalid_argument("delay_max must be nonnegative");
  for (const auto& [edge, d] : edge_delays) {
    if (!(d >= 0.0 && d <= delay_max)) {
      throw std::invalid_argument("per-edge delay outside [0, delay_max]");
    }
  }
  if (activation_law == ActivationLaw::kPerNode) {
    if (static_cast<int>(node_gaps.size()) != n) {
      throw std::invalid_argument("per-node activation needs one gap per node");
    }
    for (double gap : node_gaps) {
      if (!(gap >= tau_lo && gap <= tau_hi)) {
        throw std::invalid_argument("per-node gap outside [tau_lo, tau_hi]");
      }
    }
  }
  for (const auto& [node, extra] : slow_nodes) {
    if (node < 0 || node >= n) throw std::invalid_argument("slow node id out of range");
    if (!(extra >= 0.0)) throw std::invalid_argument("slow-node extra delay must be nonnegative");
  }
  if (recency_decay && !(*recency_decay > 0.0 && *recency_decay <= 1.0)) {
    throw std::invalid_argument("recency decay must lie in (0, 1]");
  }
}

double AsyncConfig::max_gap() const {
  double extra = 0.0;
  for (const auto& [node, e] : slow_nodes) extra = std::max(extra, e);
  return tau_hi + extra;
}

AsyncConfig AsyncConfig::lockstep(double gap) {
  AsyncConfig cfg;
  cfg.tau_lo = gap;
  cfg.tau_hi = gap;
  cfg.delay_max = 0.0;
  cfg.activation_law = ActivationLaw::kConstant;
  cfg.delay_law = DelayLaw::kConstant;
  return cfg;
}

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

Vec weighted_average(const std::vector<BufferedMessage>& buffer, std::span<const double> weights) {
  Vec acc = Vec::Zero(buffer.front().x.size());
  if (weights.empty()) {
    for (const auto& msg : buffer) acc += msg.x;
    return acc / static_cast<double>(buffer.size());
  }
  if (weights.size() != buffer.size()) throw std::invalid_argument("weight count does not match buffer");
  for (std::size_t j = 0; j < buffer.size(); ++j) acc += weights[j] * buffer[j].x;
  return acc;
}

}  // namespace

Broadcast appg_step(NodeState& node, int id, const Objective& obj, int out_degree,
                    std::span<const double> weights) {
  if (node.buffer.empty()) throw std::logic_error("activation with an empty buffer");
  node.x = weighted_average(node.buffer, weights);
  node.g_prev = node.g;
  node.g = obj.component_gradient(id, node.x);
  Vec y_sum = Vec::Zero(node.x.size());
  for (const auto& msg : node.buffer) y_sum += msg.y;
  node.y = y_sum + node.g - node.g_prev;
  Vec x_tilde = node.x - node.gamma * node.y;
  if (!all_finite(node.g) || !all_finite(node.y) || !all_finite(x_tilde)) {
    throw NonFiniteError("non-finite state at node " + std::to_string(id));
  }
  node.buffer.clear();
  ++node.activations;
  return {std::move(x_tilde), node.y / static_cast<double>(out_degree)};
}

Broadcast tracking_free_step(NodeState& node, int id, const Objective& obj,
                             std::span<const double> weights) {
  if (node.buffer.empty()) throw std::logic_error("activation with an empty buffer");
  Vec avg = weighted_average(node.buffer, weights);
  node.g_prev = node.g;
  node.g = obj.component_gradient(id, avg);
  node.x = avg - node.gamma * node.g;
  node.y.setZero();
  if (!all_finite(node.x)) throw NonFiniteError("non-finite state at node " + std::to_string(id));
  node.buffer.clear();
  ++node.activations;
  return {node.x, Vec::Zero(node.x.size())};
}

// ---------------------------------------------------------------------------

bool Simulator::QueueEntry::operator>(const QueueEntry& o) const {
  return std::tie(time, phase, node, seq) > std::tie(o.time, o.phase, o.node, o.seq);
}

Simulator::Simulator(const DirectedGraph& graph, ObjectivePtr objective, AsyncConfig config,
                     std::vector<double> stepsizes, std::vector<Vec> init, SimOptions options)
    : graph_(graph),
      objective_(std::move(objective)),
      config_(std::move(config)),
      options_(options),
      rng_(config_.seed) {
  const int n = graph_.size();
  if (!objective_) throw std::invalid_argument("simulator needs an objective");
  if (objective_->num_components() != n) {
    throw std::invalid_argument("objective has " + std::to_string(objective_->num_components()) +
                                " components for " + std::to_string(n) + " nodes");
  }
  if (static_cast<int>(stepsizes.size()) != n || static_cast<int>(init.size()) != n) {
    throw std::invalid_argument("need one stepsize and one initial point per node");
  }
  config_.validate(n);
  const int m = objective_->dim();

  trace_.n = n;
  trace_.dim = m;
  trace_.initial_sends.assign(n, {});
  nodes_.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!(stepsizes[i] > 0.0)) throw std::invalid_argument("stepsizes must be positive");
    if (init[i].size() != m) throw std::invalid_argument("initial point has wrong dimension");
    auto& node = nodes_[i];
    node.gamma = stepsizes[i];
    node.x = init[i];
    node.g = objective_->component_gradient(i, node.x);
    node.g_prev = node.g;
    node.y = options_.rule == UpdateRule::kPushPull ? node.g : Vec::Zero(m);
  }
  for (int i = 0; i < n; ++i) {
    const double out_degree = static_cast<double>(graph_.out_neighbors(i).size());
    broadcast(i, kInitialSend, {nodes_[i].x, nodes_[i].y / out_degree});
    queue_.push({sample_gap(i), 1, i, next_seq_++});
  }
}

double Simulator::sample_gap(int node) {
  double gap = config_.tau_lo;
  switch (config_.activation_law) {
    case ActivationLaw::kUniform:
      gap = std::uniform_real_distribution<double>(config_.tau_lo, config_.tau_hi)(rng_);
      break;
    case ActivationLaw::kConstant:
      break;
    case ActivationLaw::kPerNode:
      gap = config_.node_gaps[node];
      break;
  }
  if (auto it = config_.slow_nodes.find(node); it != config_.slow_nodes.end()) gap += it->second;
  return gap;
}

double Simulator::sample_delay(int from, int to) {
  switch (config_.delay_law) {
    case DelayLaw::kUniform:
      return std::uniform_real_distribution<double>(0.0, config_.delay_max)(rng_);
    case DelayLaw::kConstant:
      return config_.delay_max;
    case DelayLaw::kPerEdge:
      if (auto it = config_.edge_delays.find({from, to}); it != config_.edge_delays.end()) {
        return it->second;
      }
      return config_.delay_max;
  }
  return config_.delay_max;
}

void Simulator::broadcast(int node, std::int64_t send_index, const Broadcast& payload) {
  auto& sent = send_index == kInitialSend ? trace_.initial_sends[node] : trace_.events[send_index].sent;
  for (int receiver : graph_.out_neighbors(node)) {
    BufferedMessage msg{node, send_index, now_, payload.x, payload.y};
    if (receiver == node) {
      // Own copy goes straight to the buffers.
      sent.push_back({receiver, now_, events()});
      nodes_[node].buffer.push_back(std::move(msg));
      continue;
    }
    const double deliver_time = now_ + sample_delay(node, receiver);
    const int phase = deliver_time == now_ ? 2 : 0;
    const std::uint64_t seq = next_seq_++;
    sent.push_back({receiver, deliver_time, kPending});
    in_flight_.emplace(seq, InFlight{receiver, std::move(msg), send_index, sent.size() - 1});
    queue_.push({deliver_time, phase, receiver, seq});
  }
}

void Simulator::deliver(const QueueEntry& entry) {
  auto it = in_flight_.find(entry.seq);
  InFlight flight = std::move(it->second);
  in_flight_.erase(it);
  auto& sent = flight.event == kInitialSend ? trace_.initial_sends[flight.message.sender]
                                            : trace_.events[flight.event].sent;
  sent[flight.slot].arrive_index = events();
  nodes_[flight.receiver].buffer.push_back(std::move(flight.message));
}

std::vector<double> Simulator::payload_weights(const NodeState& node) const {
  std::vector<double> w(node.buffer.size(), 1.0 / static_cast<double>(node.buffer.size()));
  if (!config_.recency_decay) return w;
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double age = (now_ - node.buffer[j].send_time) / config_.tau_lo;
    w[j] = std::pow(*config_.recency_decay, age);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

void Simulator::activate(const QueueEntry& entry) {
  const int i = entry.node;
  auto& node = nodes_[i];
  const std::int64_t k = events();
  if (options_.record_snapshots) record_snapshot();
  if (options_.check_mass) {
    const double defect = mass_defect();
    const double rel = defect / (1.0 + gradient_sum().lpNorm<Eigen::Infinity>());
    if (rel > mass_.max_relative_defect || mass_.checks == 0) {
      mass_.max_relative_defect = rel;
      mass_.worst_event = k;
    }
    mass_.max_defect = std::max(mass_.max_defect, defect);
    ++mass_.checks;
  }

  const std::vector<double> weights = payload_weights(node);
  EventRecord record{k, now_, i, {}, {}};
  record.consumed.reserve(node.buffer.size());
  for (std::size_t j = 0; j < node.buffer.size(); ++j) {
    record.consumed.push_back({node.buffer[j].sender, node.buffer[j].send_index, weights[j]});
  }

  const int out_degree = static_cast<int>(graph_.out_neighbors(i).size());
  const std::span<const double> w =
      config_.recency_decay ? std::span<const double>(weights) : std::span<const double>();
  Broadcast payload = options_.rule == UpdateRule::kPushPull
                          ? appg_step(node, i, *objective_, out_degree, w)
                          : tracking_free_step(node, i, *objective_, w);

  trace_.events.push_back(std::move(record));
  broadcast(i, k, payload);

  node.stop_window.push_back(node.y.norm());
  while (static_cast<int>(node.stop_window.size()) > graph_.size()) node.stop_window.pop_front();

  queue_.push({now_ + sample_gap(i), 1, i, next_seq_++});
}

void Simulator::step() {
  while (!queue_.empty()) {
    QueueEntry entry = queue_.top();
    queue_.pop();
    now_ = entry.time;
    if (entry.phase == 1) {
      activate(entry);
      return;
    }
    deliver(entry);
  }
  throw std::logic_error("event queue drained");
}

bool Simulator::all_stopped(double epsilon) const {
  const auto n = static_cast<std::size_t>(graph_.size());
  return std::all_of(nodes_.begin(), nodes_.end(), [&](const NodeState& node) {
    return node.stop_window.size() == n &&
           std::all_of(node.stop_window.begin(), node.stop_window.end(),
                       [&](double v) { return v < epsilon; });
  });
}

Vec Simulator::gradient_sum() const {
  Vec total = Vec::Zero(trace_.dim);
  for (const auto& node : nodes_) total += node.g;
  return total;
}

double Simulator::mass_defect() const {
  Vec mass = Vec::Zero(trace_.dim);
  for (const auto& node : nodes_) {
    for (const auto& msg : node.buffer) mass += msg.y;
  }
  for (const auto& [seq, flight] : in_flight_) mass += flight.message.y;
  return (mass - gradient_sum()).lpNorm<Eigen::Infinity>();
}

void Simulator::record_snapshot() {
  const int n = trace_.n;
  Mat x(n, trace_.dim);
  Mat y(n, trace_.dim);
  for (int i = 0; i < n; ++i) {
    x.row(i) = nodes_[i].x.transpose();
    y.row(i) = nodes_[i].y.transpose();
  }
  trace_.x_snapshots.push_back(std::move(x));
  trace_.y_snapshots.push_back(std::move(y));
}

double mass_conservation_check(const Simulator& sim) { return sim.mass_defect(); }

SimulationResult run_simulation(const DirectedGraph& graph, ObjectivePtr objective,
                                const AsyncConfig& config, std::vector<double> stepsizes,
                                std::vector<Vec> init, const Horizon& horizon,
                                SimOptions options) {
  Simulator sim(graph, std::move(objective), config, std::move(stepsizes), std::move(init), options);
  SimulationResult result;
  const bool use_stop_rule = horizon.epsilon.has_value() && options.rule == UpdateRule::kPushPull;
  while (sim.events() < horizon.max_events) {
    try {
      sim.step();
    } catch (const NonFiniteError& err) {
      result.status = RunStatus::kDiverged;
      result.diverged_at = sim.events();
      result.message = err.what();
      break;
    }
    if (options.on_event) options.on_event(sim);
    if (use_stop_rule && sim.all_stopped(*horizon.epsilon)) {
      result.status = RunStatus::kConverged;
      break;
    }
  }
  if (result.status != RunStatus::kDiverged) {
    if (options.record_snapshots) sim.record_snapshot();
    if (options.check_mass) {
      // Final inter-event instant.
      MassReport report = sim.mass_report();
      const double defect = sim.mass_defect();
      const double rel = defect / (1.0 + sim.gradient_sum().lpNorm<Eigen::Infinity>());
      report.max_defect = std::max(report.max_defect, defect);
      if (rel > report.max_relative_defect) {
        report.max_relative_defect = rel;
        report.worst_event = sim.events();
      }
      ++report.checks;
      result.mass = report;
    }
  }
  result.end_time = sim.now();
  result.trace = sim.take_trace();
  result.nodes = sim.take_nodes();
  return result;
}

}  // namespace appg
