#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fab/secure/provider.hpp"
#include "fab/util.hpp"

namespace fab::secure {

struct NodeKeyPair {
  std::string node;
  std::int64_t install_epoch = 0;
  SimTime created_at = 0;
  KeyHandle public_part;
  KeyHandle private_part;
};

struct KeyWindow {
  std::string node;
  SimTime opens_at = 0;
  SimTime closes_at = 0;
};

// Key lifecycle and windowed private-key delivery. A fresh keypair is cut
// for every install epoch; the private part can be fetched exactly once,
// only inside the window opened just before the install. Everything a
// node needs at install time sits in the secret store encrypted under its
// current epoch, so the store itself needs no protection.
class KeyServer {
 public:
  explicit KeyServer(CryptoProvider& provider, SimTime default_window = 60)
      : provider_(provider), default_window_(default_window) {}

  SimTime default_window_duration() const { return default_window_; }

  NodeKeyPair generate_node_key(const std::string& node, std::int64_t epoch,
                                SimTime now = 0) {
    NodeEntry& entry = nodes_[node];
    if (epoch <= entry.epoch) {
      throw Error("NON_INCREASING_EPOCH",
                  "epoch " + std::to_string(epoch) + " for " + node +
                      " does not exceed " + std::to_string(entry.epoch));
    }
    KeyPair pair = provider_.generate(node, epoch);
    entry.epoch = epoch;
    entry.keys = pair;
    entry.window.reset();  // an old still-open window dies with its epoch
    return {node, epoch, now, pair.public_part, pair.private_part};
  }

  std::int64_t current_epoch(const std::string& node) const {
    auto it = nodes_.find(node);
    return it == nodes_.end() ? 0 : it->second.epoch;
  }

  KeyWindow open_window(const std::string& node, SimTime now,
                        SimTime duration = 0) {
    if (duration <= 0) duration = default_window_;
    NodeEntry& entry = require(node);
    if (entry.window && !entry.window->fetched && now < entry.window->closes_at) {
      throw Error("WINDOW_OPEN", "a key window for " + node + " is already open");
    }
    entry.window = Window{now, now + duration, false};
    return {node, now, now + duration};
  }

  // Single use: the window closes on the first successful fetch, even
  // before its nominal end.
  KeyHandle fetch_private_key(const std::string& node, SimTime now) {
    NodeEntry& entry = require(node);
    if (!entry.window || now < entry.window->opens_at) {
      throw Error("NO_WINDOW", "no open key window for " + node);
    }
    if (entry.window->fetched) {
      throw Error("ALREADY_FETCHED",
                  "private key for " + node + " was already delivered");
    }
    if (now >= entry.window->closes_at) {
      throw Error("WINDOW_EXPIRED", "key window for " + node + " has closed");
    }
    entry.window->fetched = true;
    return entry.keys.private_part;
  }

  EncryptedSecret encrypt_secret(const std::string& node,
                                 const std::string& label,
                                 std::string_view payload) {
    NodeEntry& entry = require(node);
    EncryptedSecret blob;
    blob.node = node;
    blob.label = label;
    blob.key_epoch = entry.epoch;
    blob.ciphertext = provider_.encrypt(entry.keys.public_part, payload);
    entry.secrets[label] = blob;
    return blob;
  }

  std::string decrypt_secret(const KeyHandle& private_part,
                             const EncryptedSecret& blob) {
    auto it = nodes_.find(blob.node);
    if (it == nodes_.end()) {
      throw Error("UNKNOWN_NODE", "no keys for node " + blob.node);
    }
    // Retired private parts are rejected outright, not just mismatched.
    if (private_part.epoch != it->second.epoch) {
      throw Error("EPOCH_MISMATCH",
                  "private key epoch " + std::to_string(private_part.epoch) +
                      " is not the current epoch for " + blob.node);
    }
    return provider_.decrypt(private_part, blob);
  }

  const EncryptedSecret* find_secret(const std::string& node,
                                     const std::string& label) const {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) return nullptr;
    auto sit = it->second.secrets.find(label);
    return sit == it->second.secrets.end() ? nullptr : &sit->second;
  }

  std::vector<std::string> secret_labels(const std::string& node) const {
    std::vector<std::string> out;
    auto it = nodes_.find(node);
    if (it == nodes_.end()) return out;
    for (const auto& [label, blob] : it->second.secrets) out.push_back(label);
    return out;
  }

  // Request lines: OPENWIN <node> <duration> / FETCHKEY <node> /
  // PUTSECRET <node> <label> <base64> / GETSECRET <node> <label> /
  // LISTSECRETS <node>. Replies: OK [payload] or ERR <code>.
  std::string handle_line(const std::string& line, SimTime now) {
    try {
      std::vector<std::string> words;
      for (const std::string& w : util::split(util::trim(line), ' ')) {
        if (!w.empty()) words.push_back(w);
      }
      if (words.empty()) return "ERR BAD_REQUEST";
      const std::string& cmd = words[0];
      if (cmd == "OPENWIN" && words.size() == 3) {
        KeyWindow w = open_window(words[1], now, std::stoll(words[2]));
        return "OK " + std::to_string(w.opens_at) + " " +
               std::to_string(w.closes_at);
      }
      if (cmd == "FETCHKEY" && words.size() == 2) {
        KeyHandle key = fetch_private_key(words[1], now);
        return "OK " + std::to_string(key.epoch) + " " + key.material;
      }
      if (cmd == "PUTSECRET" && words.size() == 4) {
        encrypt_secret(words[1], words[2], util::base64_decode(words[3]));
        return "OK";
      }
      if (cmd == "GETSECRET" && words.size() == 3) {
        const EncryptedSecret* blob = find_secret(words[1], words[2]);
        if (blob == nullptr) return "ERR NO_SECRET";
        return "OK " + std::to_string(blob->key_epoch) + " " +
               blob->ciphertext;
      }
      if (cmd == "LISTSECRETS" && words.size() == 2) {
        std::string out = "OK";
        for (const std::string& label : secret_labels(words[1])) {
          out += " " + label;
        }
        return out;
      }
      return "ERR BAD_REQUEST";
    } catch (const Error& e) {
      return "ERR " + e.code();
    } catch (const std::exception&) {
      return "ERR BAD_REQUEST";
    }
  }

 private:
  struct Window {
    SimTime opens_at = 0;
    SimTime closes_at = 0;
    bool fetched = false;
  };

  struct NodeEntry {
    std::int64_t epoch = 0;
    KeyPair keys;
    std::optional<Window> window;
    std::map<std::string, EncryptedSecret> secrets;
  };

  NodeEntry& require(const std::string& node) {
    auto it = nodes_.find(node);
    if (it == nodes_.end() || it->second.epoch == 0) {
      throw Error("UNKNOWN_NODE", "no keys generated for node " + node);
    }
    return it->second;
  }

  CryptoProvider& provider_;
  SimTime default_window_;
  std::map<std::string, NodeEntry> nodes_;
};

}  // namespace fab::secure
