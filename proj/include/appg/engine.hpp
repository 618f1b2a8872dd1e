#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "appg/graph.hpp"
#include "appg/objective.hpp"
#include "appg/trace.hpp"

namespace appg {

enum class DelayLaw { kUniform, kConstant, kPerEdge };
enum class ActivationLaw { kUniform, kConstant, kPerNode };

// Push-pull is the algorithm under study; tracking-free replaces the y
// tracker with a plain local gradient step and serves as a biased baseline.
enum class UpdateRule { kPushPull, kTrackingFree };

DelayLaw parse_delay_law(std::string_view name);
ActivationLaw parse_activation_law(std::string_view name);

// Timing model. Activation gaps lie in [tau_lo, tau_hi] (plus the slow-node
// extra), transmission delays in [0, delay_max].
struct AsyncConfig {
  double tau_lo = 1.0;
  double tau_hi = 1.0;
  double delay_max = 0.0;
  DelayLaw delay_law = DelayLaw::kUniform;
  ActivationLaw activation_law = ActivationLaw::kUniform;
  std::map<Edge, double> edge_delays;  // kPerEdge; unlisted edges use delay_max
  std::vector<double> node_gaps;       // kPerNode
  std::map<int, double> slow_nodes;    // node -> extra delay added to every gap
  std::uint64_t seed = 0;
  // When set, avg() weights a payload by decay^((now - send_time) / tau_lo),
  // normalized to sum 1. Unset means the plain mean.
  std::optional<double> recency_decay;

  void validate(int n) const;
  // Largest possible gap between two activations of the same node.
  double max_gap() const;
  // Constant gaps, zero delay: every node activates at tau_lo, 2 tau_lo, ...
  static AsyncConfig lockstep(double gap = 1.0);
};

struct BufferedMessage {
  int sender = 0;
  std::int64_t send_index = kInitialSend;
  double send_time = 0.0;
  Vec x;  // x~ of the sender
  Vec y;  // y~ = y_sender / |N_out^sender|
};

struct NodeState {
  Vec x;
  Vec y;
  Vec g;
  Vec g_prev;
  double gamma = 0.0;
  std::vector<BufferedMessage> buffer;  // holds both the X and Y buffers
  std::deque<double> stop_window;       // last |V| values of ||y||
  std::int64_t activations = 0;
};

struct Broadcast {
  Vec x;
  Vec y;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One push-pull update of node `id` from its buffers; returns the payloads
// to broadcast and clears the buffers. `weights` (same order as the buffer)
// defaults to the uniform mean.
Broadcast appg_step(NodeState& node, int id, const Objective& obj, int out_degree,
                    std::span<const double> weights = {});

// Tracking-free step: x <- avg - gamma * grad f_i(avg).
Broadcast tracking_free_step(NodeState& node, int id, const Objective& obj,
                             std::span<const double> weights = {});

struct Horizon {
  std::int64_t max_events = 10000;
  // Stop once every node saw ||y_i|| < epsilon on its last |V| activations.
  std::optional<double> epsilon = 1e-8;
};

class Simulator;

struct SimOptions {
  UpdateRule rule = UpdateRule::kPushPull;
  bool record_snapshots = true;
  bool check_mass = false;  // evaluate the mass defect before every event
  // Called by run_simulation after every completed event.
  std::function<void(const Simulator&)> on_event;
};

enum class RunStatus { kConverged, kHorizonExhausted, kDiverged };
std::string_view status_name(RunStatus status);

struct MassReport {
  double max_defect = 0.0;           // absolute, infinity norm
  double max_relative_defect = 0.0;  // defect / (1 + ||sum g||_inf)
  std::int64_t worst_event = 0;
  std::int64_t checks = 0;
};

struct SimulationResult {
  EventTrace trace;
  std::vector<NodeState> nodes;
  RunStatus status = RunStatus::kHorizonExhausted;
  std::optional<std::int64_t> diverged_at;
  std::string message;
  std::optional<MassReport> mass;
  double end_time = 0.0;
};

// Deterministic discrete-event executor. Between calls to step() the state
// is an inter-event instant: every activation is atomic, deliveries only move
// payloads into buffers.
class Simulator {
 public:
  Simulator(const DirectedGraph& graph, ObjectivePtr objective, AsyncConfig config,
            std::vector<double> stepsizes, std::vector<Vec> init, SimOptions options = {});

  // Processes deliveries up to and including the next activation. Throws
  // NonFiniteError when the update produced a non-finite value.
  void step();

  std::int64_t events() const { return static_cast<std::int64_t>(trace_.events.size()); }
  double now() const { return now_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  const EventTrace& trace() const { return trace_; }
  EventTrace take_trace() { return std::move(trace_); }
  std::vector<NodeState> take_nodes() { return std::move(nodes_); }

  // True when every node satisfied the local stopping rule.
  bool all_stopped(double epsilon) const;

  // ||sum of buffered y~ + in-flight y~ - sum_i g_i||_inf.
  double mass_defect() const;
  Vec gradient_sum() const;

  void record_snapshot();
  const MassReport& mass_report() const { return mass_; }

 private:
  struct QueueEntry {
    double time;
    int phase;  // 0 delivery, 1 activation, 2 delivery sent at this same instant
    int node;
    std::uint64_t seq;
    bool operator>(const QueueEntry& o) const;
  };
  struct InFlight {
    int receiver;
    BufferedMessage message;
    std::int64_t event;  // sending event or kInitialSend
    std::size_t slot;    // index into that event's delivery list
  };

  double sample_gap(int node);
  double sample_delay(int from, int to);
  void broadcast(int node, std::int64_t send_index, const Broadcast& payload);
  void deliver(const QueueEntry& entry);
  void activate(const QueueEntry& entry);
  std::vector<double> payload_weights(const NodeState& node) const;

  DirectedGraph graph_;
  ObjectivePtr objective_;
  AsyncConfig config_;
  SimOptions options_;
  std::mt19937_64 rng_;
  std::vector<NodeState> nodes_;
  EventTrace trace_;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
  std::unordered_map<std::uint64_t, InFlight> in_flight_;
  std::uint64_t next_seq_ = 0;
  MassReport mass_;
  double now_ = 0.0;
};

SimulationResult run_simulation(const DirectedGraph& graph, ObjectivePtr objective,
                                const AsyncConfig& config, std::vector<double> stepsizes,
                                std::vector<Vec> init, const Horizon& horizon,
                                SimOptions options = {});

// Maximum defect over a snapshot of buffers, in-flight payloads and gradients.
double mass_conservation_check(const Simulator& sim);

}  // namespace appg
