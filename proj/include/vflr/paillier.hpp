// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Paillier additive homomorphic encryption with g = n + 1, and a fixed-point
// codec that maps reals into the plaintext ring Z_n.
//
//   Enc(m)      = (1 + m n) r^n            mod n^2
//   Dec(c)      = L(c^lambda mod n^2) mu   mod n,   L(u) = (u - 1) / n
//   c1 (+) c2   = c1 c2                    mod n^2  -> m1 + m2
//   k  (*) c    = c^k                      mod n^2  -> k m
//
// Big integers are GMP's mpz_class. Randomness comes from RngStream so key
// generation and encryption are reproducible under a seed.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflr/bytes.hpp"
#include "vflr/errors.hpp"
#include "vflr/rng.hpp"

namespace vflr::paillier {

// Uniform integer with exactly `bits` random bits (value < 2^bits).
inline BigInt random_bits(RngStream& rng, std::size_t bits) {
  BigInt v = 0;
  std::size_t produced = 0;
  while (produced < bits) {
    const std::size_t take = std::min<std::size_t>(64, bits - produced);
    std::uint64_t word = rng.next_u64();
    if (take < 64) word &= (std::uint64_t{1} << take) - 1;
    BigInt w;
    mpz_import(w.get_mpz_t(), 1, 1, sizeof(word), 0, 0, &word);
    v = (v << static_cast<mp_bitcnt_t>(take)) | w;
    produced += take;
  }
  return v;
}

// Uniform integer in [0, bound).
inline BigInt random_below(RngStream& rng, const BigInt& bound) {
  if (sgn(bound) <= 0) throw DomainError("random_below: bound must be positive");
  const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  for (;;) {
    BigInt v = random_bits(rng, bits);
    if (v < bound) return v;
  }
}

inline BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

inline BigInt invert(const BigInt& a, const BigInt& mod) {
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw DomainError("invert: value not invertible");
  }
  return out;
}

inline BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt out;
  mpz_gcd(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

inline BigInt lcm(const BigInt& a, const BigInt& b) {
  BigInt out;
  mpz_lcm(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

inline constexpr int kMillerRabinRounds = 40;

// Miller-Rabin with random bases drawn from `rng`.
inline bool is_probable_prime(const BigInt& n, RngStream& rng, int rounds = kMillerRabinRounds) {
  if (n < 2) return false;
  static constexpr std::array<unsigned, 15> kSmall = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47};
  for (unsigned p : kSmall) {
    if (n == p) return true;
    if (mpz_divisible_ui_p(n.get_mpz_t(), p)) return false;
  }
  const BigInt n_minus_1 = n - 1;
  BigInt d = n_minus_1;
  std::size_t s = 0;
  while (mpz_even_p(d.get_mpz_t())) {
    d >>= 1;
    ++s;
  }
  for (int round = 0; round < rounds; ++round) {
    const BigInt a = random_below(rng, n - 3) + 2;  // [2, n-2]
    BigInt x = powm(a, d, n);
    if (x == 1 || x == n_minus_1) continue;
    bool composite = true;
    for (std::size_t r = 1; r < s; ++r) {
      x = (x * x) % n;
      if (x == n_minus_1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// Random prime of exactly `bits` bits with the top two bits set, so that the
// product of two such primes has exactly 2*bits bits.
inline BigInt random_prime(RngStream& rng, std::size_t bits) {
  if (bits < 8) throw ConfigError("random_prime: too few bits");
  const BigInt top = BigInt(3) << static_cast<mp_bitcnt_t>(bits - 2);
  for (;;) {
    BigInt candidate = random_bits(rng, bits) | top | 1;
    if (is_probable_prime(candidate, rng)) return candidate;
  }
}

struct PublicKey {
  BigInt n;
  BigInt n_squared;
  BigInt g;  // n + 1

  static PublicKey from_modulus(const BigInt& n) {
    if (n < 6) throw DomainError("PublicKey: modulus too small");
    return PublicKey{n, n * n, n + 1};
  }

  std::size_t bits() const { return mpz_sizeinbase(n.get_mpz_t(), 2); }

  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.n == b.n; }
};

struct PrivateKey {
  BigInt p;
  BigInt q;
  BigInt lambda_val;  // lcm(p-1, q-1)
  BigInt mu;          // L(g^lambda mod n^2)^-1 mod n

  friend bool operator==(const PrivateKey& a, const PrivateKey& b) {
    return a.p == b.p && a.q == b.q;
  }
};

struct Ciphertext {
  BigInt value;

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) { return a.value == b.value; }
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;

  // Builds a key from two known primes. Used by keygen, key-file loading,
  // and tests with toy primes.
  static KeyPair from_primes(const BigInt& p, const BigInt& q) {
    if (p == q) throw DomainError("KeyPair: p and q must be distinct");
    RngStream check(0x5eed);
    if (!is_probable_prime(p, check) || !is_probable_prime(q, check)) {
      throw DomainError("KeyPair: p and q must be prime");
    }
    const BigInt n = p * q;
    if (gcd(n, (p - 1) * (q - 1)) != 1) throw DomainError("KeyPair: gcd(pq, (p-1)(q-1)) != 1");
    PublicKey pub = PublicKey::from_modulus(n);
    const BigInt lambda_val = lcm(p - 1, q - 1);
    const BigInt u = powm(pub.g, lambda_val, pub.n_squared);
    const BigInt l = (u - 1) / n;
    return KeyPair{std::move(pub), PrivateKey{p, q, lambda_val, invert(l, n)}};
  }
};

inline bool supported_key_bits(std::size_t bits) {
  return bits == 512 || bits == 1024 || bits == 2048;
}

inline KeyPair keygen(std::size_t bits, RngStream& rng) {
  if (!supported_key_bits(bits)) {
    throw ConfigError("keygen: unsupported key length " + std::to_string(bits) +
                      " (expected 512, 1024 or 2048)");
  }
  const BigInt p = random_prime(rng, bits / 2);
  BigInt q;
  do {
    q = random_prime(rng, bits / 2);
  } while (q == p);
  return KeyPair::from_primes(p, q);
}

inline Ciphertext encrypt(const PublicKey& pk, const BigInt& m, RngStream& rng) {
  if (sgn(m) < 0 || m >= pk.n) throw DomainError("encrypt: plaintext outside [0, n)");
  BigInt r;
  do {
    r = random_below(rng, pk.n);
  } while (sgn(r) == 0 || gcd(r, pk.n) != 1);
  // g^m = (1 + n)^m = 1 + m n (mod n^2)
  const BigInt gm = (1 + m * pk.n) % pk.n_squared;
  return Ciphertext{(gm * powm(r, pk.n, pk.n_squared)) % pk.n_squared};
}

inline BigInt decrypt(const PublicKey& pk, const PrivateKey& sk, const Ciphertext& c) {
  if (sgn(c.value) < 0 || c.value >= pk.n_squared) throw DomainError("decrypt: ciphertext outside [0, n^2)");
  const BigInt u = powm(c.value, sk.lambda_val, pk.n_squared);
  const BigInt l = (u - 1) / pk.n;
  return (l * sk.mu) % pk.n;
}

inline Ciphertext add_cipher(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  return Ciphertext{(a.value * b.value) % pk.n_squared};
}

// k (*) c for 0 <= k < n.
inline Ciphertext scalar_mult(const PublicKey& pk, const BigInt& k, const Ciphertext& c) {
  if (sgn(k) < 0 || k >= pk.n) throw DomainError("scalar_mult: scalar outside [0, n)");
  return Ciphertext{powm(c.value, k, pk.n_squared)};
}

// Signed scalar. Decrypts to k m mod n, i.e. the same plaintext as
// scalar_mult(n + k, c) for negative k, but computed as (c^|k|)^-1 so the
// exponent stays short.
inline Ciphertext scalar_mult_signed(const PublicKey& pk, const BigInt& k, const Ciphertext& c) {
  if (abs(k) >= pk.n) throw DomainError("scalar_mult_signed: |k| must be < n");
  if (sgn(k) >= 0) return scalar_mult(pk, k, c);
  return Ciphertext{invert(powm(c.value, -k, pk.n_squared), pk.n_squared)};
}

// Maps an element of Z_n to its centered representative in (-n/2, n/2].
inline BigInt centered(const BigInt& m, const BigInt& n) {
  return m > n / 2 ? BigInt(m - n) : m;
}

inline std::int64_t to_int64(const BigInt& v) {
  if (!mpz_fits_slong_p(v.get_mpz_t())) throw OverflowError("to_int64: value out of range");
  static_assert(sizeof(long) == sizeof(std::int64_t));
  return mpz_get_si(v.get_mpz_t());
}

// Default fixed-point scale.
inline constexpr std::int64_t kDefaultScale = 1'000'000;

// Reals <-> Z_n. Negative values live in the upper half of the ring.
// A product of two encoded values carries scale^2; `depth` on decode tracks
// how many encoded factors were multiplied together.
class FixedPointCodec {
 public:
  FixedPointCodec(BigInt modulus, std::int64_t scale = kDefaultScale)
      : modulus_(std::move(modulus)), scale_(scale) {
    if (scale_ <= 0) throw DomainError("FixedPointCodec: scale must be positive");
    if (modulus_ < 2) throw DomainError("FixedPointCodec: modulus too small");
  }

  std::int64_t scale() const { return scale_; }
  const BigInt& modulus() const { return modulus_; }

  // round(x * scale) as a signed integer, before reduction mod n.
  BigInt quantize(double x) const {
    if (!std::isfinite(x)) throw DomainError("encode: non-finite value");
    BigInt v;
    mpz_set_d(v.get_mpz_t(), std::round(x * static_cast<double>(scale_)));
    if (2 * abs(v) >= modulus_) throw OverflowError("encode: |x| too large for the plaintext ring");
    return v;
  }

  BigInt encode(double x) const { return reduce(quantize(x)); }

  BigInt reduce(const BigInt& signed_value) const {
    BigInt m = signed_value % modulus_;
    if (sgn(m) < 0) m += modulus_;
    return m;
  }

  double decode(const BigInt& m, int depth = 1) const {
    const BigInt c = centered(m, modulus_);
    return mpz_get_d(c.get_mpz_t()) / std::pow(static_cast<double>(scale_), depth);
  }

  // Value of x after a round trip through the codec.
  double quantized(double x) const {
    return mpz_get_d(quantize(x).get_mpz_t()) / static_cast<double>(scale_);
  }

 private:
  BigInt modulus_;
  std::int64_t scale_;
};

// ---------------------------------------------------------------------------
// Key files: "VFLK" | version | kind | fields, each field a 4-byte big-endian
// length followed by the big-endian magnitude. Public: n. Private: p, q.

inline constexpr std::uint8_t kKeyFileVersion = 1;
inline constexpr std::uint8_t kKeyKindPublic = 1;
inline constexpr std::uint8_t kKeyKindPrivate = 2;

inline Bytes serialize_public_key(const PublicKey& pk) {
  ByteWriter w;
  w.raw(std::string_view("VFLK"));
  w.u8(kKeyFileVersion);
  w.u8(kKeyKindPublic);
  w.magnitude(pk.n);
  return w.take();
}

inline Bytes serialize_private_key(const KeyPair& kp) {
  ByteWriter w;
  w.raw(std::string_view("VFLK"));
  w.u8(kKeyFileVersion);
  w.u8(kKeyKindPrivate);
  w.magnitude(kp.priv.p);
  w.magnitude(kp.priv.q);
  return w.take();
}

namespace detail {

inline ByteReader open_key_blob(std::span<const std::uint8_t> blob, std::uint8_t expected_kind) {
  ByteReader r(blob);
  const auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "VFLK") throw ParseError("key file: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kKeyFileVersion) {
    throw ParseError("key file: unsupported version " + std::to_string(version));
  }
  if (r.u8() != expected_kind) throw ParseError("key file: unexpected key kind");
  return r;
}

}  // namespace detail

inline PublicKey parse_public_key(std::span<const std::uint8_t> blob) {
  ByteReader r = detail::open_key_blob(blob, kKeyKindPublic);
  BigInt n = r.magnitude();
  if (!r.done()) throw ParseError("key file: trailing bytes");
  return PublicKey::from_modulus(n);
}

inline KeyPair parse_private_key(std::span<const std::uint8_t> blob) {
  ByteReader r = detail::open_key_blob(blob, kKeyKindPrivate);
  BigInt p = r.magnitude();
  BigInt q = r.magnitude();
  if (!r.done()) throw ParseError("key file: trailing bytes");
  try {
    return KeyPair::from_primes(p, q);
  } catch (const DomainError& e) {
    throw ParseError(std::string("key file: ") + e.what());
  }
}

}  // namespace vflr::paillier
