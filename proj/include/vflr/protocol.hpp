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

// Two-party vertical logistic regression. Bob (active) holds labels and
// features X^B, Alice (passive) holds X^A. Each party runs on its own thread
// and they talk only through a transport endpoint. Every message either
// party sends is appended to a shared transcript.

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "vflr/config.hpp"
#include "vflr/data.hpp"
#include "vflr/errors.hpp"
#include "vflr/mechanisms.hpp"
#include "vflr/numeric.hpp"
#include "vflr/paillier.hpp"
#include "vflr/report.hpp"
#include "vflr/rng.hpp"
#include "vflr/transport.hpp"
#include "vflr/wire.hpp"

namespace vflr::protocol {

using wire::MessageKind;
using wire::ProtocolMessage;

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// CPU time of the calling thread. Crypto and channel costs are measured
// this way so that a peer thread running in between does not get billed.
class ThreadClock {
 public:
  ThreadClock() : start_(now()) {}
  double seconds() const { return now() - start_; }

 private:
  static double now() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
  }
  double start_;
};

// Adds elapsed thread CPU time to *sink on destruction.
class ScopedTimer {
 public:
  explicit ScopedTimer(double* sink) : sink_(sink) {}
  ~ScopedTimer() { *sink_ += clock_.seconds(); }

 private:
  double* sink_;
  ThreadClock clock_;
};

inline std::vector<std::uint32_t> to_u32(const std::vector<std::size_t>& v) {
  std::vector<std::uint32_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<std::uint32_t>(v[i]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Batch schedules

// Rounds of sample indices plus, for each epoch, how many rounds have run
// once that epoch is over.
struct Schedule {
  std::vector<std::vector<std::size_t>> rounds;
  std::vector<std::size_t> epoch_ends;
};

// Per epoch: shuffle 0..n-1 and cut into consecutive batches. The last batch
// of an epoch may be short.
inline Schedule make_batch_schedule(std::size_t n, std::size_t batch_size, std::size_t epochs,
                                    std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  RngStream rng = derive_stream(seed, PartyId::kBob, StreamPurpose::kBatches);
  Schedule s;
  std::vector<std::size_t> perm(n);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      s.rounds.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                            perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    s.epoch_ends.push_back(s.rounds.size());
  }
  return s;
}

// Hybrid rounds: one epoch is a shuffled pass cut into chunks of
// round(q |S|) intended samples.
inline std::vector<std::vector<std::size_t>> hybrid_epoch_chunks(std::size_t n, std::size_t n_ones,
                                                                 RngStream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t start = 0; start < n; start += n_ones) {
    const std::size_t stop = std::min(n, start + n_ones);
    chunks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                        perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return chunks;
}

struct HybridDraw {
  std::vector<std::size_t> subset;     // S, in announced order
  std::vector<std::uint8_t> intended;  // m over S
  std::vector<std::uint8_t> rr;        // RR(m) over S
  std::size_t forwarded = 0;           // L_RR, ones in rr
  std::size_t live = 0;                // k, positions with m = 1 and rr = 1
  std::size_t redraws = 0;
};

// S = chunk plus |S| - |chunk| decoys drawn from the other samples, then
// shuffled. m marks the chunk members.
inline void assemble_subset(const std::vector<std::size_t>& chunk, std::size_t n, std::size_t s_size,
                            RngStream& rng, std::vector<std::size_t>& subset,
                            std::vector<std::uint8_t>& intended) {
  if (chunk.size() > s_size) throw ConfigError("hybrid: intended batch larger than |S|");
  std::vector<std::uint8_t> in_chunk(n, 0);
  for (std::size_t i : chunk) in_chunk[i] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(n - chunk.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!in_chunk[i]) rest.push_back(i);
  const std::size_t decoys = s_size - chunk.size();
  if (decoys > rest.size()) throw ConfigError("hybrid: not enough samples for the decoys");
  // Partial Fisher-Yates: the first `decoys` slots end up a uniform sample.
  for (std::size_t i = 0; i < decoys; ++i) {
    const std::size_t j = i + rng.uniform_below(rest.size() - i);
    std::swap(rest[i], rest[j]);
  }
  std::vector<std::pair<std::size_t, std::uint8_t>> members;
  members.reserve(s_size);
  for (std::size_t i : chunk) members.emplace_back(i, 1);
  for (std::size_t i = 0; i < decoys; ++i) members.emplace_back(rest[i], 0);
  rng.shuffle(std::span<std::pair<std::size_t, std::uint8_t>>(members));
  subset.clear();
  intended.clear();
  for (const auto& [idx, bit] : members) {
    subset.push_back(idx);
    intended.push_back(bit);
  }
}

// One RR application over m, no acceptance test.
inline HybridDraw draw_rr(const std::vector<std::size_t>& subset, const std::vector<std::uint8_t>& intended,
                          const mechanisms::RRParams& rr, RngStream& rng) {
  HybridDraw d;
  d.subset = subset;
  d.intended = intended;
  d.rr = mechanisms::random_response(intended, rr, rng);
  for (std::size_t i = 0; i < d.rr.size(); ++i) {
    d.forwarded += d.rr[i];
    d.live += d.rr[i] & d.intended[i];
  }
  return d;
}

// Redraws RR(m) until d_A < L_RR < |S| and k >= 1.
inline HybridDraw draw_hybrid_round(const std::vector<std::size_t>& chunk, std::size_t n, const HybridParams& h,
                                    std::size_t d_alice, std::size_t max_redraws, RngStream& decoy_rng,
                                    RngStream& rr_rng) {
  std::vector<std::size_t> subset;
  std::vector<std::uint8_t> intended;
  assemble_subset(chunk, n, h.s_size, decoy_rng, subset, intended);
  const auto rr = h.rr();
  for (std::size_t attempt = 0;; ++attempt) {
    HybridDraw d = draw_rr(subset, intended, rr, rr_rng);
    d.redraws = attempt;
    if (d.forwarded > d_alice && d.forwarded < h.s_size && d.live >= 1) return d;
    if (attempt >= max_redraws) {
      throw ProtocolError("hybrid: no admissible indicator draw after " + std::to_string(max_redraws) +
                          " redraws (need d_A < L_RR < |S| and at least one live sample)");
    }
  }
}

// ---------------------------------------------------------------------------
// Run bookkeeping

struct RoundTrace {
  std::uint32_t round = 0;
  std::vector<std::size_t> announced;   // B, or S in the hybrid protocol
  std::vector<std::size_t> forwarded;   // rows Alice computed on
  std::vector<std::size_t> true_batch;  // rows whose residues reach the gradient
  DenseVector residues;                 // Bob's exact residues on true_batch
  std::size_t denominator = 0;          // effective gradient denominator
  std::size_t redraws = 0;
  DenseVector alice_gradient;           // g^A as applied (before regularization)
  std::vector<BigInt> alice_unmasked;   // X^T r at scale^2, encrypted protocols
  DenseVector bob_gradient;             // g^B as applied (before regularization)
};

struct Hooks {
  // Replaces the configured noise mechanism in the plaintext protocols.
  std::function<double(double)> residue_mechanism;
  // Baseline and noise protocols: use these batches instead of the seeded
  // schedule.
  std::optional<Schedule> batches;
};

struct TrainResult {
  DenseVector w_alice;
  DenseVector w_bob;
  wire::Transcript transcript;
  TrainReport report;
  std::vector<RoundTrace> rounds;
  std::vector<std::size_t> epoch_ends;

  DenseVector weights() const {
    std::vector<double> w(w_alice.values());
    w.insert(w.end(), w_bob.begin(), w_bob.end());
    return DenseVector(std::move(w));
  }
};

class TranscriptRecorder {
 public:
  void record(const ProtocolMessage& msg) {
    std::lock_guard lock(mu_);
    transcript_.messages.push_back(msg);
  }
  void timing(std::uint32_t round, double seconds) {
    std::lock_guard lock(mu_);
    transcript_.round_timings.push_back(wire::RoundTiming{round, seconds});
  }
  wire::Transcript take() {
    std::lock_guard lock(mu_);
    return std::move(transcript_);
  }

 private:
  std::mutex mu_;
  wire::Transcript transcript_;
};

// One party's view of the link: frames go out through the endpoint and
// every outbound message is recorded.
class Channel {
 public:
  Channel(transport::Endpoint& endpoint, TranscriptRecorder& recorder, PartyId self)
      : endpoint_(endpoint), recorder_(recorder), self_(self) {}

  void send(MessageKind kind, std::uint32_t round, wire::Body body) {
    ProtocolMessage msg = wire::make_message(kind, round, self_, std::move(body));
    detail::ThreadClock watch;
    Bytes frame = wire::encode_frame(msg);
    recorder_.record(msg);
    endpoint_.send(frame);
    seconds_ += watch.seconds();
  }

  // Records a message that never goes on the wire.
  void note(MessageKind kind, std::uint32_t round, wire::Body body) {
    recorder_.record(wire::make_message(kind, round, self_, std::move(body)));
  }

  std::optional<ProtocolMessage> recv_any() {
    auto frame = endpoint_.recv();
    if (!frame) return std::nullopt;
    detail::ThreadClock watch;
    ProtocolMessage msg = wire::decode_frame(*frame);
    seconds_ += watch.seconds();
    if (msg.sender == self_) throw ProtocolError("received a message claiming to come from ourselves");
    return msg;
  }

  ProtocolMessage recv(MessageKind kind, std::uint32_t round) {
    auto msg = recv_any();
    if (!msg) {
      throw ProtocolError(std::string("peer closed the channel while waiting for ") + wire::to_string(kind) +
                          " in round " + std::to_string(round));
    }
    if (msg->kind != kind) {
      throw ProtocolError(std::string("expected ") + wire::to_string(kind) + ", got " + wire::to_string(msg->kind));
    }
    if (msg->round != round) {
      throw ProtocolError(std::string(wire::to_string(kind)) + " for round " + std::to_string(msg->round) +
                          " while in round " + std::to_string(round));
    }
    return std::move(*msg);
  }

  void close() { endpoint_.close(); }
  double seconds() const { return seconds_; }

 private:
  transport::Endpoint& endpoint_;
  TranscriptRecorder& recorder_;
  PartyId self_;
  double seconds_ = 0.0;
};

// ---------------------------------------------------------------------------
// Passive party

struct AliceRound {
  std::vector<std::size_t> forwarded;
  DenseVector gradient;
  std::vector<BigInt> unmasked;
};

class PassiveParty {
 public:
  PassiveParty(const DenseMatrix& x, const TrainConfig& cfg)
      : x_(x),
        cfg_(cfg),
        w_(x.cols()),
        enc_rng_(derive_stream(cfg.seed, PartyId::kAlice, StreamPurpose::kEncryption)),
        mask_rng_(derive_stream(cfg.seed, PartyId::kAlice, StreamPurpose::kMask)) {}

  // Serves requests until Bob closes his side.
  void serve(Channel& ch) {
    while (auto msg = ch.recv_any()) {
      switch (msg->kind) {
        case MessageKind::kPublicKey: on_public_key(*msg); break;
        case MessageKind::kBatchAnnounce: on_batch(ch, *msg); break;
        case MessageKind::kEncResidues: on_encrypted_residues(ch, *msg); break;
        case MessageKind::kDecMaskedGradient: on_unmasked(*msg); break;
        case MessageKind::kPlainNoisedResidues: on_plain_residues(*msg); break;
        default:
          throw ProtocolError(std::string("passive party: unexpected ") + wire::to_string(msg->kind));
      }
    }
  }

  const DenseVector& weights() const { return w_; }
  const std::vector<DenseVector>& history() const { return history_; }
  const std::vector<AliceRound>& rounds() const { return rounds_; }
  double crypto_seconds() const { return crypto_s_; }

 private:
  enum class Stage { kIdle, kAwaitResidues, kAwaitUnmasked };

  void expect(Stage stage, const ProtocolMessage& msg) const {
    if (stage_ != stage || msg.round != round_) {
      throw ProtocolError(std::string("passive party: ") + wire::to_string(msg.kind) + " out of order in round " +
                          std::to_string(msg.round));
    }
  }

  void on_public_key(const ProtocolMessage& msg) {
    if (pk_ || round_ != 0 || msg.round != 0) throw ProtocolError("passive party: unexpected public key");
    const auto& body = msg.as<wire::PublicKeyBody>();
    pk_ = paillier::PublicKey::from_modulus(body.n);
    codec_.emplace(body.n, body.scale);
    scale_sq_ = BigInt(body.scale) * body.scale;
    xq_.resize(x_.rows() * x_.cols());
    for (std::size_t i = 0; i < xq_.size(); ++i) xq_[i] = codec_->quantize(x_.values()[i]);
  }

  void on_batch(Channel& ch, const ProtocolMessage& msg) {
    if (stage_ != Stage::kIdle || msg.round != round_ + 1) {
      throw ProtocolError("passive party: batch announcement out of order");
    }
    round_ = msg.round;
    const auto& body = msg.as<wire::BatchAnnounceBody>();
    if (!body.rr_mask.empty() && body.rr_mask.size() != body.indices.size()) {
      throw ProtocolError("passive party: indicator vector length differs from the index list");
    }
    for (auto idx : body.indices)
      if (idx >= x_.rows()) throw ProtocolError("passive party: sample index out of range");
    rows_ = body.forwarded();
    if (rows_.empty()) throw ProtocolError("passive party: empty batch");
    const DenseMatrix xb = x_.select_rows(rows_);
    const DenseVector partial = matvec(xb, w_);
    ch.send(MessageKind::kPartialLinPred, round_, wire::RealVectorBody{partial.values()});
    stage_ = Stage::kAwaitResidues;
  }

  void on_encrypted_residues(Channel& ch, const ProtocolMessage& msg) {
    expect(Stage::kAwaitResidues, msg);
    if (!pk_) throw ProtocolError("passive party: encrypted residues before a public key");
    const auto& cts = msg.as<wire::CipherVectorBody>().values;
    if (cts.size() != rows_.size()) throw ProtocolError("passive party: residue count differs from the batch");
    const std::size_t d = x_.cols();
    std::vector<paillier::Ciphertext> out(d);
    mask_.assign(d, BigInt(0));
    {
      detail::ScopedTimer timer(&crypto_s_);
      for (const auto& c : cts) {
        if (sgn(c.value) <= 0 || c.value >= pk_->n_squared) throw ProtocolError("passive party: malformed ciphertext");
      }
      const BigInt half_range = BigInt(65536) * scale_sq_;
      for (std::size_t j = 0; j < d; ++j) {
        // Positive and negative scalars accumulate separately; one inversion per column.
        BigInt pos = 1;
        BigInt neg = 1;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
          const BigInt& k = xq_[rows_[i] * d + j];
          if (sgn(k) == 0) continue;
          if (sgn(k) > 0) {
            pos = (pos * paillier::powm(cts[i].value, k, pk_->n_squared)) % pk_->n_squared;
          } else {
            neg = (neg * paillier::powm(cts[i].value, -k, pk_->n_squared)) % pk_->n_squared;
          }
        }
        BigInt acc = pos;
        if (neg != 1) acc = (acc * paillier::invert(neg, pk_->n_squared)) % pk_->n_squared;
        mask_[j] = paillier::random_below(mask_rng_, 2 * half_range) - half_range;
        const auto masked = paillier::encrypt(*pk_, codec_->reduce(mask_[j]), enc_rng_);
        out[j] = paillier::add_cipher(*pk_, paillier::Ciphertext{acc}, masked);
      }
    }
    ch.note(MessageKind::kMaskNote, round_, wire::IntegerVectorBody{mask_});
    ch.send(MessageKind::kMaskedEncGradient, round_, wire::CipherVectorBody{std::move(out)});
    stage_ = Stage::kAwaitUnmasked;
  }

  void on_unmasked(const ProtocolMessage& msg) {
    expect(Stage::kAwaitUnmasked, msg);
    const auto& values = msg.as<wire::IntegerVectorBody>().values;
    if (values.size() != x_.cols()) throw ProtocolError("passive party: gradient length differs from d_A");
    AliceRound info;
    info.forwarded = rows_;
    info.unmasked.resize(values.size());
    DenseVector g(values.size());
    const double denom = static_cast<double>(rows_.size()) * mpz_get_d(scale_sq_.get_mpz_t());
    for (std::size_t j = 0; j < values.size(); ++j) {
      info.unmasked[j] = values[j] - mask_[j];
      g[j] = -mpz_get_d(info.unmasked[j].get_mpz_t()) / denom;
    }
    info.gradient = g;
    apply(g);
    rounds_.push_back(std::move(info));
  }

  void on_plain_residues(const ProtocolMessage& msg) {
    expect(Stage::kAwaitResidues, msg);
    if (pk_) throw ProtocolError("passive party: plaintext residues in an encrypted session");
    const auto& values = msg.as<wire::RealVectorBody>().values;
    if (values.size() != rows_.size()) throw ProtocolError("passive party: residue count differs from the batch");
    const DenseVector g = gradient(x_.select_rows(rows_), DenseVector(values), rows_.size());
    apply(g);
    rounds_.push_back(AliceRound{rows_, g, {}});
  }

  void apply(const DenseVector& g) {
    for (std::size_t j = 0; j < w_.size(); ++j) {
      w_[j] -= cfg_.learning_rate * (g[j] + 2.0 * cfg_.lambda * w_[j]);
    }
    history_.push_back(w_);
    stage_ = Stage::kIdle;
  }

  const DenseMatrix& x_;
  TrainConfig cfg_;
  DenseVector w_;
  RngStream enc_rng_;
  RngStream mask_rng_;
  double crypto_s_ = 0.0;

  std::optional<paillier::PublicKey> pk_;
  std::optional<paillier::FixedPointCodec> codec_;
  BigInt scale_sq_;
  std::vector<BigInt> xq_;

  Stage stage_ = Stage::kIdle;
  std::uint32_t round_ = 0;
  std::vector<std::size_t> rows_;
  std::vector<BigInt> mask_;
  std::vector<DenseVector> history_;
  std::vector<AliceRound> rounds_;
};

// ---------------------------------------------------------------------------
// Active party

class ActiveParty {
 public:
  ActiveParty(const DenseMatrix& x, const data::Labels& y, std::size_t d_alice, const TrainConfig& cfg,
              const Hooks& hooks)
      : x_(x),
        y_(y),
        d_alice_(d_alice),
        cfg_(cfg),
        hooks_(hooks),
        w_(x.cols()),
        batch_rng_(derive_stream(cfg.seed, PartyId::kBob, StreamPurpose::kBatches)),
        enc_rng_(derive_stream(cfg.seed, PartyId::kBob, StreamPurpose::kEncryption)),
        noise_rng_(derive_stream(cfg.seed, PartyId::kBob, StreamPurpose::kNoise)),
        rr_rng_(derive_stream(cfg.seed, PartyId::kBob, StreamPurpose::kRandomResponse)),
        decoy_rng_(derive_stream(cfg.seed, PartyId::kBob, StreamPurpose::kDecoys)) {}

  void drive(Channel& ch, TranscriptRecorder& recorder) {
    const auto kind = cfg_.defense.kind;
    if (cfg_.defense.uses_encryption()) {
      {
        detail::ScopedTimer timer(&crypto_s_);
        RngStream keygen_rng = derive_stream(cfg_.seed, PartyId::kBob, StreamPurpose::kKeygen);
        keys_ = paillier::keygen(cfg_.key_bits, keygen_rng);
      }
      codec_.emplace(keys_->pub.n, cfg_.fixed_point_scale);
      ch.send(MessageKind::kPublicKey, 0, wire::PublicKeyBody{keys_->pub.n, cfg_.fixed_point_scale});
    }

    std::uint32_t round = 0;
    if (kind == DefenseKind::kHybrid) {
      const auto& h = cfg_.defense.hybrid;
      const std::size_t n_ones = h.intended_batch();
      for (std::size_t e = 0; e < cfg_.epochs; ++e) {
        for (const auto& chunk : hybrid_epoch_chunks(y_.size(), n_ones, batch_rng_)) {
          ++round;
          detail::Stopwatch watch;
          HybridDraw draw = draw_hybrid_round(chunk, y_.size(), h, d_alice_, cfg_.max_redraws, decoy_rng_, rr_rng_);
          encrypted_round(ch, round, draw.subset, draw.rr, draw.intended, draw.redraws);
          recorder.timing(round, watch.seconds());
        }
        epoch_ends_.push_back(round);
      }
    } else {
      Schedule schedule = hooks_.batches ? *hooks_.batches
                                         : make_batch_schedule(y_.size(), cfg_.batch_size, cfg_.epochs, cfg_.seed);
      std::size_t next_end = 0;
      for (const auto& batch : schedule.rounds) {
        ++round;
        detail::Stopwatch watch;
        if (kind == DefenseKind::kNone) {
          encrypted_round(ch, round, batch, {}, {}, 0);
        } else {
          plain_round(ch, round, batch);
        }
        recorder.timing(round, watch.seconds());
        while (next_end < schedule.epoch_ends.size() && schedule.epoch_ends[next_end] == round) {
          epoch_ends_.push_back(round);
          ++next_end;
        }
      }
      if (epoch_ends_.empty() || epoch_ends_.back() != round) epoch_ends_.push_back(round);
    }
    ch.close();
  }

  const DenseVector& weights() const { return w_; }
  const std::vector<DenseVector>& history() const { return history_; }
  const std::vector<RoundTrace>& rounds() const { return rounds_; }
  const std::vector<std::size_t>& epoch_ends() const { return epoch_ends_; }
  double crypto_seconds() const { return crypto_s_; }

 private:
  // Bob's residues y - sigma(z) on the given rows, z = partial + X^B w.
  DenseVector residues_on(const std::vector<std::size_t>& rows, const std::vector<double>& partial) const {
    if (partial.size() != rows.size()) throw ProtocolError("active party: partial prediction length mismatch");
    DenseVector r(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(partial[i])) throw ProtocolError("active party: non-finite partial prediction");
      const double z = partial[i] + dot(x_.row(rows[i]), w_.span());
      r[i] = static_cast<double>(y_[rows[i]]) - sigmoid(z);
    }
    return r;
  }

  // g^B = -(1/denom) sum over live rows of r_i x^B_i
  DenseVector bob_gradient(const std::vector<std::size_t>& rows, const DenseVector& r, std::size_t denom) const {
    return gradient(x_.select_rows(rows), r, denom);
  }

  void apply(const DenseVector& g) {
    for (std::size_t j = 0; j < w_.size(); ++j) {
      w_[j] -= cfg_.learning_rate * (g[j] + 2.0 * cfg_.lambda * w_[j]);
    }
    history_.push_back(w_);
  }

  void encrypted_round(Channel& ch, std::uint32_t round, const std::vector<std::size_t>& announced,
                       const std::vector<std::uint8_t>& rr, const std::vector<std::uint8_t>& intended,
                       std::size_t redraws) {
    const bool hybrid = !rr.empty();
    ch.send(MessageKind::kBatchAnnounce, round, wire::BatchAnnounceBody{rr, detail::to_u32(announced)});

    std::vector<std::size_t> forwarded;
    std::vector<std::uint8_t> live;
    for (std::size_t i = 0; i < announced.size(); ++i) {
      if (hybrid && !rr[i]) continue;
      forwarded.push_back(announced[i]);
      live.push_back(hybrid ? intended[i] : 1);
    }
    const auto plp = ch.recv(MessageKind::kPartialLinPred, round);
    const DenseVector r = residues_on(forwarded, plp.as<wire::RealVectorBody>().values);

    const std::size_t big_l = forwarded.size();
    const std::size_t k = static_cast<std::size_t>(std::count(live.begin(), live.end(), 1));
    const std::size_t denom = (hybrid && cfg_.normalize_by_k) ? k : big_l;
    const double factor = static_cast<double>(big_l) / static_cast<double>(denom);

    RoundTrace trace;
    trace.round = round;
    trace.announced = announced;
    trace.forwarded = forwarded;
    trace.denominator = denom;
    trace.redraws = redraws;
    std::vector<double> live_r;

    std::vector<paillier::Ciphertext> cts(big_l);
    {
      detail::ScopedTimer timer(&crypto_s_);
      for (std::size_t i = 0; i < big_l; ++i) {
        const double value = live[i] ? r[i] * factor : 0.0;
        cts[i] = paillier::encrypt(keys_->pub, codec_->encode(value), enc_rng_);
      }
    }
    for (std::size_t i = 0; i < big_l; ++i) {
      if (!live[i]) continue;
      trace.true_batch.push_back(forwarded[i]);
      live_r.push_back(r[i]);
    }
    trace.residues = DenseVector(live_r);
    ch.send(MessageKind::kEncResidues, round, wire::CipherVectorBody{std::move(cts)});

    const auto meg = ch.recv(MessageKind::kMaskedEncGradient, round);
    const auto& masked = meg.as<wire::CipherVectorBody>().values;
    if (masked.size() != d_alice_) throw ProtocolError("active party: masked gradient length differs from d_A");
    std::vector<BigInt> plain(masked.size());
    {
      detail::ScopedTimer timer(&crypto_s_);
      for (std::size_t j = 0; j < masked.size(); ++j) {
        if (sgn(masked[j].value) <= 0 || masked[j].value >= keys_->pub.n_squared) {
          throw ProtocolError("active party: malformed ciphertext");
        }
        plain[j] = paillier::centered(paillier::decrypt(keys_->pub, keys_->priv, masked[j]), keys_->pub.n);
      }
    }
    ch.send(MessageKind::kDecMaskedGradient, round, wire::IntegerVectorBody{std::move(plain)});

    trace.bob_gradient = bob_gradient(trace.true_batch, trace.residues, denom);
    apply(trace.bob_gradient);
    rounds_.push_back(std::move(trace));
  }

  void plain_round(Channel& ch, std::uint32_t round, const std::vector<std::size_t>& batch) {
    ch.send(MessageKind::kBatchAnnounce, round, wire::BatchAnnounceBody{{}, detail::to_u32(batch)});
    const auto plp = ch.recv(MessageKind::kPartialLinPred, round);
    const DenseVector r = residues_on(batch, plp.as<wire::RealVectorBody>().values);

    std::vector<double> noised(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (hooks_.residue_mechanism) {
        noised[i] = hooks_.residue_mechanism(r[i]);
      } else if (cfg_.defense.kind == DefenseKind::kAdd) {
        noised[i] = mechanisms::m_add(r[i], cfg_.defense.add, noise_rng_);
      } else {
        noised[i] = mechanisms::m_mult(r[i], cfg_.defense.mult, noise_rng_);
      }
    }
    ch.send(MessageKind::kPlainNoisedResidues, round, wire::RealVectorBody{std::move(noised)});

    RoundTrace trace;
    trace.round = round;
    trace.announced = batch;
    trace.forwarded = batch;
    trace.true_batch = batch;
    trace.residues = r;
    trace.denominator = batch.size();
    trace.bob_gradient = bob_gradient(batch, r, batch.size());
    apply(trace.bob_gradient);
    rounds_.push_back(std::move(trace));
  }

  const DenseMatrix& x_;
  const data::Labels& y_;
  std::size_t d_alice_;
  TrainConfig cfg_;
  const Hooks& hooks_;
  DenseVector w_;
  RngStream batch_rng_;
  RngStream enc_rng_;
  RngStream noise_rng_;
  RngStream rr_rng_;
  RngStream decoy_rng_;
  double crypto_s_ = 0.0;

  std::optional<paillier::KeyPair> keys_;
  std::optional<paillier::FixedPointCodec> codec_;
  std::vector<DenseVector> history_;
  std::vector<RoundTrace> rounds_;
  std::vector<std::size_t> epoch_ends_;
};

// ---------------------------------------------------------------------------
// Evaluation and drivers

inline DenseVector predict(const DenseMatrix& x, const DenseVector& w) { return sigmoid(matvec(x, w)); }

inline Metrics evaluate(const DenseMatrix& x, const data::Labels& y, const DenseVector& w, double lambda) {
  const DenseVector preds = predict(x, w);
  const DenseVector labels = data::to_vector(y);
  return Metrics{accuracy(preds, labels), auc(preds, labels), logistic_loss(preds, labels, w, lambda)};
}

inline double training_loss(const DenseMatrix& x, const data::Labels& y, const DenseVector& w, double lambda) {
  return logistic_loss(predict(x, w), data::to_vector(y), w, lambda);
}

namespace detail {

inline DenseVector concat(const DenseVector& a, const DenseVector& b) {
  std::vector<double> w(a.values());
  w.insert(w.end(), b.begin(), b.end());
  return DenseVector(std::move(w));
}

}  // namespace detail

// Runs the protocol selected by cfg.defense on the vertically split training
// set. Metrics are computed on `eval` when given, else on the training set.
inline TrainResult train(const data::VerticalSplit& split, const TrainConfig& cfg,
                         const data::VerticalSplit* eval = nullptr, const Hooks& hooks = {}) {
  validate(cfg, split.size(), split.d_alice());
  if (split.alice.rows() != split.size() || split.bob.rows() != split.size()) {
    throw DimensionError("train: feature blocks and labels differ in length");
  }
  if (eval && (eval->d_alice() != split.d_alice() || eval->d_bob() != split.d_bob())) {
    throw DimensionError("train: evaluation split has different feature blocks");
  }

  auto endpoints =
      cfg.transport == TransportKind::kSocket ? transport::make_socket_pair() : transport::make_inprocess_pair();
  TranscriptRecorder recorder;
  PassiveParty alice(split.alice, cfg);
  ActiveParty bob(split.bob, split.labels, split.d_alice(), cfg, hooks);
  Channel alice_ch(*endpoints.alice, recorder, PartyId::kAlice);
  Channel bob_ch(*endpoints.bob, recorder, PartyId::kBob);

  // The first failure is the cause; the other side usually fails as a
  // consequence of the closed channel.
  std::mutex error_mu;
  std::exception_ptr first_error;
  auto record_error = [&](std::exception_ptr e) {
    std::lock_guard lock(error_mu);
    if (!first_error) first_error = e;
  };

  detail::Stopwatch total;
  std::thread alice_thread([&] {
    try {
      alice.serve(alice_ch);
    } catch (...) {
      record_error(std::current_exception());
    }
    alice_ch.close();
  });
  try {
    bob.drive(bob_ch, recorder);
  } catch (...) {
    record_error(std::current_exception());
  }
  bob_ch.close();
  alice_thread.join();
  const double total_s = total.seconds();
  if (first_error) std::rethrow_exception(first_error);

  TrainResult result;
  result.w_alice = alice.weights();
  result.w_bob = bob.weights();
  result.transcript = recorder.take();
  result.rounds = bob.rounds();
  result.epoch_ends = bob.epoch_ends();
  if (alice.rounds().size() != result.rounds.size()) throw ProtocolError("train: parties disagree on round count");
  double forwarded_sum = 0.0;
  for (std::size_t i = 0; i < result.rounds.size(); ++i) {
    result.rounds[i].alice_gradient = alice.rounds()[i].gradient;
    result.rounds[i].alice_unmasked = alice.rounds()[i].unmasked;
    forwarded_sum += static_cast<double>(result.rounds[i].forwarded.size());
  }

  TrainReport& report = result.report;
  report.protocol = protocol_name(cfg.defense.kind);
  report.config = cfg;
  report.rounds = result.rounds.size();
  const DenseMatrix pooled = split.pooled();
  for (std::size_t end : result.epoch_ends) {
    if (end == 0) continue;
    const DenseVector w = detail::concat(alice.history()[end - 1], bob.history()[end - 1]);
    report.per_epoch_loss.push_back(training_loss(pooled, split.labels, w, cfg.lambda));
  }
  const DenseVector w = result.weights();
  report.final_metrics = eval ? evaluate(eval->pooled(), eval->labels, w, cfg.lambda)
                              : evaluate(pooled, split.labels, w, cfg.lambda);
  if (cfg.defense.kind == DefenseKind::kHybrid && !result.rounds.empty()) {
    report.mean_forwarded = forwarded_sum / static_cast<double>(result.rounds.size());
  }
  report.timings = Timings{total_s, alice.crypto_seconds() + bob.crypto_seconds(),
                           alice_ch.seconds() + bob_ch.seconds()};
  return result;
}

struct CentralizedResult {
  DenseVector weights;
  TrainReport report;
  std::vector<DenseVector> gradients;  // per round, before regularization
};

// Plain mini-batch gradient descent on the pooled features. Without an
// explicit schedule it uses the same seeded batches as the two-party runs.
inline CentralizedResult centralized_train(const DenseMatrix& x, const data::Labels& y, const TrainConfig& cfg,
                                           const Schedule* schedule = nullptr, const DenseMatrix* eval_x = nullptr,
                                           const data::Labels* eval_y = nullptr) {
  if (x.rows() != y.size()) throw DimensionError("centralized_train: features and labels differ in length");
  if (y.empty()) throw ConfigError("training set is empty");
  const Schedule owned = schedule ? Schedule{} : make_batch_schedule(y.size(), cfg.batch_size, cfg.epochs, cfg.seed);
  const Schedule& s = schedule ? *schedule : owned;
  detail::Stopwatch total;
  CentralizedResult out;
  DenseVector w(x.cols());
  const DenseVector labels = data::to_vector(y);
  std::size_t next_end = 0;
  for (std::size_t round = 0; round < s.rounds.size(); ++round) {
    const auto& batch = s.rounds[round];
    if (batch.empty()) throw ConfigError("centralized_train: empty batch");
    const DenseMatrix xb = x.select_rows(batch);
    DenseVector yb(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) yb[i] = labels[batch[i]];
    const DenseVector r = residues(yb, predict(xb, w));
    const DenseVector g = gradient(xb, r, batch.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * (g[j] + 2.0 * cfg.lambda * w[j]);
    out.gradients.push_back(g);
    while (next_end < s.epoch_ends.size() && s.epoch_ends[next_end] == round + 1) {
      out.report.per_epoch_loss.push_back(training_loss(x, y, w, cfg.lambda));
      ++next_end;
    }
  }
  out.weights = w;
  out.report.protocol = "centralized";
  out.report.config = cfg;
  out.report.rounds = s.rounds.size();
  out.report.final_metrics =
      (eval_x && eval_y) ? evaluate(*eval_x, *eval_y, w, cfg.lambda) : evaluate(x, y, w, cfg.lambda);
  out.report.timings.total_s = total.seconds();
  return out;
}

// Schedule of the true batches a finished run used, for replaying it
// centrally.
inline Schedule true_batch_schedule(const TrainResult& run) {
  Schedule s;
  for (const auto& r : run.rounds) s.rounds.push_back(r.true_batch);
  s.epoch_ends = run.epoch_ends;
  return s;
}

}  // namespace vflr::protocol
