#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace appg {

// Send index of the broadcast every node issues at initialization.
inline constexpr std::int64_t kInitialSend = -1;
// Arrival index of a message still in flight when the simulation stopped.
inline constexpr std::int64_t kPending = -1;

// One payload pair taken from a node's buffers at an activation.
struct ConsumedMessage {
  int sender = 0;
  std::int64_t send_index = kInitialSend;  // event index of the sending activation
  double weight = 0.0;                     // weight in the x-average
};

// One copy of a broadcast, addressed to a single out-neighbor.
struct Delivery {
  int receiver = 0;
  double deliver_time = 0.0;
  // Index of the first activation event processed after the payload entered
  // the receiver's buffer, or kPending.
  std::int64_t arrive_index = kPending;
};

struct EventRecord {
  std::int64_t k = 0;
  double time = 0.0;
  int node = 0;
  std::vector<ConsumedMessage> consumed;
  std::vector<Delivery> sent;  // the broadcast issued by this activation
};

// Ordered record of every activation. Event k maps the state snapshot k
// (all x_i, y_i just before the activation) to snapshot k+1.
struct EventTrace {
  int n = 0;
  int dim = 0;
  std::vector<std::vector<Delivery>> initial_sends;  // per node, sent at t = 0
  std::vector<EventRecord> events;
  std::vector<Eigen::MatrixXd> x_snapshots;  // n x dim, events.size() + 1 entries when recorded
  std::vector<Eigen::MatrixXd> y_snapshots;

  std::int64_t size() const { return static_cast<std::int64_t>(events.size()); }
  bool has_snapshots() const { return x_snapshots.size() == events.size() + 1; }
};

// Line-delimited JSON export. Line 1 is a header object
// {"format":"appg-trace","version":1,"n":..,"dim":..}; then one
// {"kind":"init","node":i,"sent":[[receiver,deliver_time,arrive_index],...]}
// line per node; then one
// {"kind":"activate","k":k,"t":t,"node":i,"consumed":[[sender,send_index,weight],...],"sent":[...]}
// line per event. Snapshots are not exported.
void write_trace(const EventTrace& trace, std::ostream& out);
void write_trace(const EventTrace& trace, const std::filesystem::path& path);
EventTrace read_trace(std::istream& in);
EventTrace read_trace(const std::filesystem::path& path);

}  // namespace appg
