#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lstego/core/tensor.hpp"

namespace lstego {

// Fixed-length bit vector. Every element is 0 or 1.
class SecretPayload {
 public:
  SecretPayload() = default;
  explicit SecretPayload(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("secret bits must be 0 or 1");
  }
  static SecretPayload zeros(int length) {
    if (length < 0) throw std::invalid_argument("negative secret length");
    return SecretPayload(std::vector<std::uint8_t>(length, 0));
  }

  int size() const { return static_cast<int>(bits_.size()); }
  std::uint8_t operator[](int i) const { return bits_[i]; }
  void set(int i, std::uint8_t v) {
    if (v > 1) throw std::invalid_argument("secret bits must be 0 or 1");
    bits_.at(i) = v;
  }
  void flip(int i) { bits_.at(i) ^= 1; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  SecretPayload inverted() const {
    auto b = bits_;
    for (auto& v : b) v ^= 1;
    return SecretPayload(std::move(b));
  }

  // Hexadecimal, most significant bit first, right-padded with zeros to a nibble.
  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (int i = 0; i < size(); i += 4) {
      int v = 0;
      for (int j = 0; j < 4; ++j) v = (v << 1) | (i + j < size() ? bits_[i + j] : 0);
      out += digits[v];
    }
    return out;
  }

  static SecretPayload from_hex(std::string_view hex, int length) {
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    if (length < 0 || static_cast<int>(hex.size()) * 4 < length)
      throw std::invalid_argument("hex string too short for " + std::to_string(length) + " bits");
    std::vector<std::uint8_t> bits;
    for (char c : hex) {
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else throw std::invalid_argument(std::string("invalid hex digit '") + c + "'");
      for (int j = 3; j >= 0; --j) bits.push_back(static_cast<std::uint8_t>((v >> j) & 1));
    }
    for (std::size_t i = length; i < bits.size(); ++i)
      if (bits[i]) throw std::invalid_argument("hex string has nonzero bits beyond the secret length");
    bits.resize(length);
    return SecretPayload(std::move(bits));
  }

  std::string to_bitstring() const {
    std::string s;
    for (auto b : bits_) s += static_cast<char>('0' + b);
    return s;
  }

  static SecretPayload from_bitstring(std::string_view s) {
    std::vector<std::uint8_t> bits;
    for (char c : s) {
      if (c != '0' && c != '1') throw std::invalid_argument("bit string may contain only 0 and 1");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return SecretPayload(std::move(bits));
  }

  friend bool operator==(const SecretPayload&, const SecretPayload&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline SecretPayload random_secret(int length, std::uint64_t seed) {
  if (length <= 0) throw std::invalid_argument("secret length must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bits(length);
  std::uint64_t word = 0;
  for (int i = 0; i < length; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (63 - i % 64)) & 1);
  }
  return SecretPayload(std::move(bits));
}

inline SecretPayload random_secret(int length, std::mt19937_64& rng) {
  return random_secret(length, rng());
}

// Big-endian bit expansion of the bytes, zero-padded on the right.
inline SecretPayload string_to_bits(std::string_view text, int length) {
  if (length < 0 || static_cast<long>(text.size()) * 8 > length)
    throw std::invalid_argument("text of " + std::to_string(text.size()) + " bytes does not fit in " +
                                std::to_string(length) + " bits");
  std::vector<std::uint8_t> bits(length, 0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto byte = static_cast<unsigned char>(text[i]);
    for (int j = 0; j < 8; ++j) bits[i * 8 + j] = static_cast<std::uint8_t>((byte >> (7 - j)) & 1);
  }
  return SecretPayload(std::move(bits));
}

// Whole bytes only; trailing partial byte and trailing zero bytes are dropped.
inline std::string bits_to_string(const SecretPayload& p) {
  std::string out;
  for (int i = 0; i + 8 <= p.size(); i += 8) {
    unsigned v = 0;
    for (int j = 0; j < 8; ++j) v = (v << 1) | p[i + j];
    out += static_cast<char>(v);
  }
  while (!out.empty() && out.back() == '\0') out.pop_back();
  return out;
}

template <typename T>
Tensor<T> payloads_to_tensor(std::span<const SecretPayload> ps) {
  if (ps.empty()) throw std::invalid_argument("no payloads");
  const int l = ps[0].size();
  Tensor<T> t({static_cast<int>(ps.size()), l});
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].size() != l) throw std::invalid_argument("payload lengths differ");
    for (int j = 0; j < l; ++j) t[i * l + j] = static_cast<T>(ps[i][j]);
  }
  return t;
}

// ------------------------------------------------------------------------ BCH

// Binary BCH code over GF(2^m), possibly shortened from 2^m - 1 to n bits.
struct EccConfig {
  int codeword_length_n = 0;
  int data_length_k = 0;
  int correctable_errors_t = 0;

  int parity_bits() const { return codeword_length_n - data_length_k; }
  friend bool operator==(const EccConfig&, const EccConfig&) = default;
};

class Gf2m {
 public:
  explicit Gf2m(int m) : m_(m), n_((1 << m) - 1), exp_(2 * n_), log_(n_ + 1, -1) {
    // Primitive polynomials, x^m term included.
    static constexpr int prim[] = {0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409,
                                   0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B};
    if (m < 2 || m > 16) throw std::invalid_argument("GF(2^m) supported for 2 <= m <= 16");
    int x = 1;
    for (int i = 0; i < n_; ++i) {
      exp_[i] = x;
      log_[x] = i;
      x <<= 1;
      if (x & (1 << m)) x ^= prim[m];
    }
    for (int i = n_; i < 2 * n_; ++i) exp_[i] = exp_[i - n_];
  }
  int m() const { return m_; }
  int order() const { return n_; }
  int alpha_pow(long e) const { return exp_[((e % n_) + n_) % n_]; }
  int mul(int a, int b) const { return (a && b) ? exp_[log_[a] + log_[b]] : 0; }
  int inv(int a) const {
    if (!a) throw std::domain_error("GF inverse of zero");
    return exp_[(n_ - log_[a]) % n_];
  }
  int log(int a) const { return log_[a]; }

 private:
  int m_, n_;
  std::vector<int> exp_, log_;
};

class BchCode {
 public:
  // Generator over GF(2^m) for t errors: product of the distinct minimal
  // polynomials of alpha^1 .. alpha^{2t}.
  BchCode(int m, int t, int n) : gf_(m), t_(t), n_(n) {
    if (t < 1) throw std::invalid_argument("BCH needs t >= 1");
    const int full = gf_.order();
    std::vector<bool> used(full, false);
    std::vector<std::uint8_t> g{1};  // coefficients, index = degree
    for (int i = 1; i <= 2 * t; ++i) {
      if (used[i % full]) continue;
      std::vector<int> coset;
      for (int c = i % full; !used[c]; c = (c * 2) % full) {
        used[c] = true;
        coset.push_back(c);
      }
      std::vector<int> mp{1};  // over GF(2^m)
      for (int c : coset) {
        std::vector<int> next(mp.size() + 1, 0);
        const int root = gf_.alpha_pow(c);
        for (std::size_t d = 0; d < mp.size(); ++d) {
          next[d + 1] ^= mp[d];
          next[d] ^= gf_.mul(mp[d], root);
        }
        mp = std::move(next);
      }
      std::vector<std::uint8_t> prod(g.size() + mp.size() - 1, 0);
      for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = 0; b < mp.size(); ++b) {
          if (mp[b] > 1) throw std::logic_error("minimal polynomial is not binary");
          prod[a + b] ^= static_cast<std::uint8_t>(g[a] & mp[b]);
        }
      g = std::move(prod);
    }
    gen_ = std::move(g);
    const int deg = static_cast<int>(gen_.size()) - 1;
    if (n > full || n <= deg)
      throw std::invalid_argument("BCH(n=" + std::to_string(n) + ", t=" + std::to_string(t) + ") invalid over GF(2^" +
                                  std::to_string(m) + ")");
    k_ = n - deg;
  }

  int n() const { return n_; }
  int k() const { return k_; }
  int t() const { return t_; }
  int m() const { return gf_.m(); }
  int parity() const { return n_ - k_; }
  EccConfig config() const { return {n_, k_, t_}; }

  // Systematic: codeword = data bits followed by parity bits. Bit i of the
  // codeword is the coefficient of x^(n-1-i).
  SecretPayload encode(const SecretPayload& data) const {
    if (data.size() != k_)
      throw std::invalid_argument("ecc_encode expects " + std::to_string(k_) + " data bits, got " +
                                  std::to_string(data.size()));
    const int p = parity();
    std::vector<std::uint8_t> rem(p, 0);  // rem[j] = coeff of x^(p-1-j)
    for (int i = 0; i < k_; ++i) {
      const std::uint8_t fb = data[i] ^ rem[0];
      for (int j = 0; j + 1 < p; ++j) rem[j] = rem[j + 1] ^ (fb & gen_[p - 1 - j]);
      rem[p - 1] = fb & gen_[0];
    }
    std::vector<std::uint8_t> cw(data.bits());
    cw.insert(cw.end(), rem.begin(), rem.end());
    return SecretPayload(std::move(cw));
  }

  struct Decoded {
    SecretPayload data;
    bool corrected;
  };

  Decoded decode(const SecretPayload& codeword) const {
    if (codeword.size() != n_)
      throw std::invalid_argument("ecc_decode expects " + std::to_string(n_) + " codeword bits, got " +
                                  std::to_string(codeword.size()));
    auto systematic = [&](const SecretPayload& cw) {
      return SecretPayload(std::vector<std::uint8_t>(cw.bits().begin(), cw.bits().begin() + k_));
    };
    // Syndromes S_j = r(alpha^j), j = 1..2t.
    std::vector<int> synd(2 * t_ + 1, 0);
    bool clean = true;
    for (int j = 1; j <= 2 * t_; ++j) {
      int s = 0;
      for (int i = 0; i < n_; ++i)
        if (codeword[i]) s ^= gf_.alpha_pow(static_cast<long>(j) * (n_ - 1 - i));
      synd[j] = s;
      clean = clean && s == 0;
    }
    if (clean) return {systematic(codeword), true};

    // Berlekamp-Massey.
    std::vector<int> lambda{1}, prev{1};
    int len = 0, shift = 1, prev_disc = 1;
    for (int r = 1; r <= 2 * t_; ++r) {
      int disc = synd[r];
      for (int i = 1; i <= len && i < static_cast<int>(lambda.size()); ++i) disc ^= gf_.mul(lambda[i], synd[r - i]);
      if (disc == 0) {
        ++shift;
        continue;
      }
      const int coef = gf_.mul(disc, gf_.inv(prev_disc));
      std::vector<int> next = lambda;
      if (next.size() < prev.size() + shift) next.resize(prev.size() + shift, 0);
      for (std::size_t i = 0; i < prev.size(); ++i) next[i + shift] ^= gf_.mul(coef, prev[i]);
      if (2 * len <= r - 1) {
        prev = lambda;
        len = r - len;
        prev_disc = disc;
        shift = 1;
      } else {
        ++shift;
      }
      lambda = std::move(next);
    }
    while (lambda.size() > 1 && lambda.back() == 0) lambda.pop_back();
    const int deg = static_cast<int>(lambda.size()) - 1;
    if (deg > t_ || deg != len) return {systematic(codeword), false};

    // Chien search restricted to the n live positions.
    std::vector<int> positions;
    for (int pos = 0; pos < n_; ++pos) {
      // error at degree d = n-1-pos is a root at alpha^{-d}
      const long d = n_ - 1 - pos;
      int v = 0;
      for (int i = 0; i <= deg; ++i) v ^= gf_.mul(lambda[i], gf_.alpha_pow(-d * i));
      if (v == 0) positions.push_back(pos);
    }
    if (static_cast<int>(positions.size()) != deg) return {systematic(codeword), false};
    SecretPayload fixed = codeword;
    for (int pos : positions) fixed.flip(pos);
    return {systematic(fixed), true};
  }

 private:
  Gf2m gf_;
  int t_, n_, k_ = 0;
  std::vector<std::uint8_t> gen_;
};

// Smallest field whose full length covers n; validates (n, k, t).
inline BchCode make_bch(const EccConfig& cfg) {
  int m = 2;
  while ((1 << m) - 1 < cfg.codeword_length_n) ++m;
  if (cfg.data_length_k < 1 || cfg.data_length_k > cfg.codeword_length_n)
    throw std::invalid_argument("EccConfig needs 1 <= k <= n");
  // A shortened code can also live in a larger field; pick the first that matches.
  for (; m <= 16; ++m) {
    try {
      BchCode c(m, cfg.correctable_errors_t, cfg.codeword_length_n);
      if (c.k() == cfg.data_length_k) return c;
    } catch (const std::invalid_argument&) {
    }
  }
  throw std::invalid_argument("no BCH code with n=" + std::to_string(cfg.codeword_length_n) +
                              ", k=" + std::to_string(cfg.data_length_k) +
                              ", t=" + std::to_string(cfg.correctable_errors_t));
}

// Largest-payload t-error code whose codeword fills a channel of `channel_bits`.
// Uses GF(2^7) when the channel fits in 127 bits and leaves room for data,
// otherwise the smallest field that does.
inline std::optional<EccConfig> ecc_for_channel(int channel_bits, int t = 5) {
  std::vector<int> fields;
  if (channel_bits <= 127) fields.push_back(7);
  for (int m = 2; m <= 16; ++m)
    if ((1 << m) - 1 >= channel_bits && m != 7) fields.push_back(m);
  for (int m : fields) {
    try {
      BchCode c(m, t, channel_bits);
      return c.config();
    } catch (const std::invalid_argument&) {
    }
  }
  return std::nullopt;
}

// Data of k bits under a GF(2^7) t-error code (n = k + parity).
inline EccConfig ecc_for_data(int data_bits, int t = 5) {
  BchCode probe(7, t, 127);
  const int n = data_bits + probe.parity();
  return BchCode(7, t, n).config();
}

inline EccConfig default_ecc_config() { return *ecc_for_channel(100, 5); }

inline SecretPayload ecc_encode(const SecretPayload& data, const EccConfig& cfg) {
  if (data.size() != cfg.data_length_k)
    throw std::invalid_argument("ecc_encode: data length " + std::to_string(data.size()) + " != k " +
                                std::to_string(cfg.data_length_k));
  return make_bch(cfg).encode(data);
}

inline BchCode::Decoded ecc_decode(const SecretPayload& codeword, const EccConfig& cfg) {
  if (codeword.size() != cfg.codeword_length_n)
    throw std::invalid_argument("ecc_decode: codeword length " + std::to_string(codeword.size()) + " != n " +
                                std::to_string(cfg.codeword_length_n));
  return make_bch(cfg).decode(codeword);
}

}  // namespace lstego
