#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fab/util.hpp"

namespace fab::notify {

// A tag is the whole message: a single word naming an action class.
inline void check_tag(const std::string& tag) {
  if (tag.empty()) throw Error("MALFORMED_TAG", "empty tag");
  for (char c : tag) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      throw Error("MALFORMED_TAG", "tag '" + tag + "' contains whitespace");
    }
  }
}

struct Subscription {
  std::string client;
  std::string tag;
  SimTime since = 0;
};

struct NotifyEvent {
  std::string tag;
  std::int64_t seq = 0;  // per-tag, gapless
  SimTime issued_at = 0;

  bool operator==(const NotifyEvent& other) const = default;
};

// Tag fan-out with at-least-once delivery. An event goes to the clients
// subscribed at issue time; whatever was handed out but never acked is
// queued again on reconnect. Clients dedup by (tag, seq).
class Broker {
 public:
  void connect(const std::string& client) {
    ClientState& st = clients_[client];
    if (st.connected) return;
    st.connected = true;
    // unacked deliveries from the previous session go out again first
    while (!st.in_flight.empty()) {
      st.queue.push_front(st.in_flight.back());
      st.in_flight.pop_back();
    }
  }

  void disconnect(const std::string& client) {
    ClientState& st = state(client);
    st.connected = false;
  }

  bool is_connected(const std::string& client) const {
    auto it = clients_.find(client);
    return it != clients_.end() && it->second.connected;
  }

  Subscription subscribe(const std::string& client, const std::string& tag,
                         SimTime now = 0) {
    check_tag(tag);
    ClientState& st = clients_[client];
    auto it = st.subscriptions.find(tag);
    if (it != st.subscriptions.end()) return {client, tag, it->second};
    st.subscriptions.emplace(tag, now);
    return {client, tag, now};
  }

  void unsubscribe(const std::string& client, const std::string& tag) {
    check_tag(tag);
    state(client).subscriptions.erase(tag);
  }

  // Fan-out snapshots the subscriber set at issue time; a later subscriber
  // does not receive this event and is expected to run one unconditional
  // sync instead.
  NotifyEvent notify(const std::string& tag, SimTime now = 0) {
    check_tag(tag);
    NotifyEvent ev{tag, ++tag_seq_[tag], now};
    for (auto& [name, st] : clients_) {
      if (st.subscriptions.contains(tag)) st.queue.push_back(ev);
    }
    return ev;
  }

  std::int64_t last_seq(const std::string& tag) const {
    auto it = tag_seq_.find(tag);
    return it == tag_seq_.end() ? 0 : it->second;
  }

  // Hands out everything queued for the client and keeps it in flight
  // until acked. Duplicates across reconnects are the client's problem.
  std::vector<NotifyEvent> deliver(const std::string& client) {
    ClientState& st = state(client);
    if (!st.connected) {
      throw Error("NOT_CONNECTED", "client " + client + " is not connected");
    }
    std::vector<NotifyEvent> out;
    while (!st.queue.empty()) {
      out.push_back(st.queue.front());
      st.in_flight.push_back(st.queue.front());
      st.queue.pop_front();
    }
    return out;
  }

  // Acks every in-flight event of this tag up to and including seq.
  void ack(const std::string& client, const std::string& tag,
           std::int64_t seq) {
    ClientState& st = state(client);
    std::deque<NotifyEvent> keep;
    for (const NotifyEvent& ev : st.in_flight) {
      if (!(ev.tag == tag && ev.seq <= seq)) keep.push_back(ev);
    }
    st.in_flight = std::move(keep);
  }

  bool has_subscription(const std::string& client,
                        const std::string& tag) const {
    auto it = clients_.find(client);
    return it != clients_.end() && it->second.subscriptions.contains(tag);
  }

  size_t queued(const std::string& client) const {
    auto it = clients_.find(client);
    return it == clients_.end() ? 0 : it->second.queue.size();
  }

  // Line protocol: SUB <tag> / UNSUB <tag> / NOTIFY <tag> / ACK <tag> <seq>.
  // Deliveries are pushed separately as `EVT <tag> <seq>` lines.
  std::string handle_line(const std::string& client, const std::string& line,
                          SimTime now) {
    try {
      std::vector<std::string> words;
      for (const std::string& w : util::split(util::trim(line), ' ')) {
        if (!w.empty()) words.push_back(w);
      }
      if (words.empty()) return "ERR BAD_REQUEST";
      if (words[0] == "SUB" && words.size() == 2) {
        subscribe(client, words[1], now);
        return "OK";
      }
      if (words[0] == "UNSUB" && words.size() == 2) {
        unsubscribe(client, words[1]);
        return "OK";
      }
      if (words[0] == "NOTIFY" && words.size() == 2) {
        NotifyEvent ev = notify(words[1], now);
        return "OK " + std::to_string(ev.seq);
      }
      if (words[0] == "ACK" && words.size() == 3) {
        ack(client, words[1], std::stoll(words[2]));
        return "OK";
      }
      return "ERR BAD_REQUEST";
    } catch (const Error& e) {
      return "ERR " + e.code();
    } catch (const std::exception&) {
      return "ERR BAD_REQUEST";
    }
  }

  std::vector<std::string> push_lines(const std::string& client) {
    std::vector<std::string> out;
    for (const NotifyEvent& ev : deliver(client)) {
      out.push_back("EVT " + ev.tag + " " + std::to_string(ev.seq));
    }
    return out;
  }

 private:
  struct ClientState {
    bool connected = false;
    std::map<std::string, SimTime> subscriptions;  // tag -> since
    std::deque<NotifyEvent> queue;
    std::deque<NotifyEvent> in_flight;
  };

  ClientState& state(const std::string& client) {
    auto it = clients_.find(client);
    if (it == clients_.end()) {
      throw Error("UNKNOWN_CLIENT", "client " + client + " never connected");
    }
    return it->second;
  }

  std::map<std::string, ClientState> clients_;
  std::map<std::string, std::int64_t> tag_seq_;
};

}  // namespace fab::notify
