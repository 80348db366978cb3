#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fab/util.hpp"

namespace fab::secure {

// Opaque key handle. The material is whatever the provider needs to do
// its work; holders must not interpret it.
struct KeyHandle {
  std::string node;
  std::int64_t epoch = 0;
  bool is_private = false;
  std::string material;

  bool operator==(const KeyHandle& other) const = default;
};

struct KeyPair {
  KeyHandle public_part;
  KeyHandle private_part;
};

struct EncryptedSecret {
  std::string node;
  std::string label;
  std::int64_t key_epoch = 0;
  std::string ciphertext;
};

// The protocol around the keys is the interesting part; the cipher is
// pluggable. Implementations must bind ciphertexts to (node, epoch) and
// fail closed on any mismatch.
class CryptoProvider {
 public:
  virtual ~CryptoProvider() = default;

  virtual KeyPair generate(const std::string& node, std::int64_t epoch) = 0;
  virtual std::string encrypt(const KeyHandle& public_part,
                              std::string_view payload) = 0;
  virtual std::string decrypt(const KeyHandle& private_part,
                              const EncryptedSecret& blob) = 0;
};

// Deterministic keyed transform for simulation: a per-(node, epoch)
// keystream XORed over the payload, hex encoded. Not a cipher — but the
// ciphertext carries no payload bytes and only the matching private
// handle gets them back, which is all the tests need.
class DeterministicProvider : public CryptoProvider {
 public:
  explicit DeterministicProvider(std::uint64_t salt = 0x66616272u)
      : salt_(salt) {}

  KeyPair generate(const std::string& node, std::int64_t epoch) override {
    KeyPair pair;
    pair.public_part = {node, epoch, false, token(node, epoch, "pub")};
    pair.private_part = {node, epoch, true, token(node, epoch, "priv")};
    return pair;
  }

  std::string encrypt(const KeyHandle& public_part,
                      std::string_view payload) override {
    if (public_part.is_private ||
        public_part.material != token(public_part.node, public_part.epoch, "pub")) {
      throw Error("PROVIDER_FAILURE", "not a valid public key handle");
    }
    return transform(public_part.node, public_part.epoch, payload);
  }

  std::string decrypt(const KeyHandle& private_part,
                      const EncryptedSecret& blob) override {
    if (!private_part.is_private ||
        private_part.material !=
            token(private_part.node, private_part.epoch, "priv")) {
      throw Error("PROVIDER_FAILURE", "not a valid private key handle");
    }
    if (private_part.node != blob.node) {
      throw Error("PROVIDER_FAILURE", "key does not belong to " + blob.node);
    }
    if (private_part.epoch != blob.key_epoch) {
      throw Error("EPOCH_MISMATCH",
                  "secret sealed at epoch " + std::to_string(blob.key_epoch) +
                      ", key is epoch " + std::to_string(private_part.epoch));
    }
    std::string raw = unhex(blob.ciphertext);
    return xor_stream(private_part.node, private_part.epoch, raw);
  }

 private:
  std::string token(const std::string& node, std::int64_t epoch,
                    std::string_view part) const {
    util::DigestBuilder b;
    b.add(std::to_string(salt_)).add(node).add(std::to_string(epoch)).add(part);
    return b.hex();
  }

  std::string xor_stream(const std::string& node, std::int64_t epoch,
                         std::string_view data) const {
    std::uint64_t state =
        util::fnv1a64(node + "/" + std::to_string(epoch), salt_ * 0x9e3779b97f4a7c15ull + 1);
    std::string out(data.size(), '\0');
    for (size_t i = 0; i < data.size(); ++i) {
      // splitmix64 step per byte
      state += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      z = z ^ (z >> 31);
      out[i] = static_cast<char>(data[i] ^ static_cast<char>(z & 0xff));
    }
    return out;
  }

  std::string transform(const std::string& node, std::int64_t epoch,
                        std::string_view payload) const {
    std::string mixed = xor_stream(node, epoch, payload);
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(mixed.size() * 2);
    for (unsigned char c : mixed) {
      out.push_back(digits[c >> 4]);
      out.push_back(digits[c & 0xf]);
    }
    return out;
  }

  static std::string unhex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
      throw Error("PROVIDER_FAILURE", "truncated ciphertext");
    }
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      throw Error("PROVIDER_FAILURE", "corrupt ciphertext");
    };
    std::string out(hex.size() / 2, '\0');
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<char>((nibble(hex[2 * i]) << 4) |
                                 nibble(hex[2 * i + 1]));
    }
    return out;
  }

  std::uint64_t salt_;
};

}  // namespace fab::secure
