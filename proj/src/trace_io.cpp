#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "appg/errors.hpp"
#include "appg/trace.hpp"

namespace appg {

using nlohmann::json;

namespace {

json sends_to_json(const std::vector<Delivery>& sends) {
  json out = json::array();
  for (const auto& d : sends) out.push_back({d.receiver, d.deliver_time, d.arrive_index});
  return out;
}

std::vector<Delivery> sends_from_json(const json& j) {
  std::vector<Delivery> out;
  for (const auto& item : j) {
    out.push_back({item.at(0).get<int>(), item.at(1).get<double>(), item.at(2).get<std::int64_t>()});
  }
  return out;
}

}  // namespace

void write_trace(const EventTrace& trace, std::ostream& out) {
  out << json{{"format", "appg-trace"}, {"version", 1}, {"n", trace.n}, {"dim", trace.dim}}.dump()
      << '\n';
  for (int i = 0; i < trace.n; ++i) {
    out << json{{"kind", "init"}, {"node", i}, {"sent", sends_to_json(trace.initial_sends[i])}}.dump()
        << '\n';
  }
  for (const auto& ev : trace.events) {
    json consumed = json::array();
    for (const auto& c : ev.consumed) consumed.push_back({c.sender, c.send_index, c.weight});
    out << json{{"kind", "activate"},
                {"k", ev.k},
                {"t", ev.time},
                {"node", ev.node},
                {"consumed", std::move(consumed)},
                {"sent", sends_to_json(ev.sent)}}
               .dump()
        << '\n';
  }
}

void write_trace(const EventTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace " + path.string());
  write_trace(trace, out);
  if (!out) throw IoError("write failure on " + path.string());
}

EventTrace read_trace(std::istream& in) {
  EventTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("format")) {
      trace.n = j.at("n").get<int>();
      trace.dim = j.at("dim").get<int>();
      trace.initial_sends.assign(trace.n, {});
      continue;
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "init") {
      trace.initial_sends.at(j.at("node").get<int>()) = sends_from_json(j.at("sent"));
    } else if (kind == "activate") {
      EventRecord ev;
      ev.k = j.at("k").get<std::int64_t>();
      ev.time = j.at("t").get<double>();
      ev.node = j.at("node").get<int>();
      for (const auto& c : j.at("consumed")) {
        ev.consumed.push_back({c.at(0).get<int>(), c.at(1).get<std::int64_t>(), c.at(2).get<double>()});
      }
      ev.sent = sends_from_json(j.at("sent"));
      if (ev.k != trace.size()) {
        throw std::invalid_argument("trace line " + std::to_string(line_no) + ": events out of order");
      }
      trace.events.push_back(std::move(ev));
    } else {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": unknown kind " + kind);
    }
  }
  return trace;
}

EventTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  return read_trace(in);
}

}  // namespace appg
