#include "eulerflow/train.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

namespace eulerflow {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'U', 'L', 'F'};
constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(in[pos + i]) << (8 * i));
  }
  pos += sizeof(T);
  return value;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw Error("train config: learning rate must be > 0");
  }
  if (max_epochs < 1) {
    throw Error("train config: max epochs must be >= 1");
  }
  if (patience < 1) {
    throw Error("train config: patience must be >= 1");
  }
  if (!(min_delta >= 0.0)) {
    throw Error("train config: min_delta must be >= 0");
  }
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!grads.allFinite()) {
    throw Error("adam_step: diverged (non-finite gradient)");
  }
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params.array() -=
      lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + eps);
}

FitResult fit(const FrameSequence& seq, PriorParams initial, const LossConfig& loss_cfg,
              const TrainConfig& train_cfg, const ProgressCallback& progress) {
  seq.validate();
  loss_cfg.validate();
  train_cfg.validate();

  const SequenceIndex index(seq);
  std::mt19937_64 rng(train_cfg.seed);

  PriorParams params = std::move(initial);
  AdamState state = AdamState::zeros(params.size());

  FitResult result{params, {}};
  auto& history = result.history;
  history.best_total = total_objective(params, seq, loss_cfg, index).total;
  if (!std::isfinite(history.best_total)) {
    throw DivergenceError("diverged: initial objective is not finite", 0, params);
  }
  double reference = history.best_total;
  int stale = 0;

  std::vector<int> order(static_cast<std::size_t>(seq.last_frame() + 1));
  const auto started = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown total;
    try {
      for (const int t : order) {
        const auto obj = frame_objective(params, seq, t, loss_cfg, index, &rng);
        adam_step(params.values(), obj.param_grads, state, train_cfg.learning_rate,
                  train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps);
      }
      total = total_objective(params, seq, loss_cfg, index);
    } catch (const Error& e) {
      throw DivergenceError(std::string("diverged during epoch ") + std::to_string(epoch) + ": " +
                                e.what() + " (last good epoch " +
                                std::to_string(epoch - 1) + ")",
                            epoch - 1, result.params);
    }
    if (!std::isfinite(total.total)) {
      throw DivergenceError("diverged: objective not finite after epoch " +
                                std::to_string(epoch) + " (last good epoch " +
                                std::to_string(epoch - 1) + ")",
                            epoch - 1, result.params);
    }

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    history.epochs.push_back({epoch, total, elapsed.count()});
    if (progress) {
      progress(history.epochs.back(), params);
    }

    if (total.total < history.best_total) {
      history.best_total = total.total;
      history.best_epoch = epoch;
      result.params = params;
    }
    if (total.total < reference - train_cfg.min_delta) {
      reference = total.total;
      stale = 0;
    } else if (++stale >= train_cfg.patience) {
      history.early_stopped = true;
      break;
    }
  }
  return result;
}

FitResult fit(const FrameSequence& seq, const PriorConfig& prior_cfg, const LossConfig& loss_cfg,
              const TrainConfig& train_cfg, const ProgressCallback& progress) {
  return fit(seq, init_params(prior_cfg), loss_cfg, train_cfg, progress);
}

void save_checkpoint(const PriorParams& params, const std::filesystem::path& path) {
  if (params.depth() > 0xFFFF || params.width() > 0xFFFF) {
    throw Error("save_checkpoint: depth/width do not fit the header");
  }
  std::vector<unsigned char> bytes;
  bytes.reserve(kCheckpointHeaderBytes + static_cast<std::size_t>(params.size()) * 8);
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(bytes, kCheckpointVersion);
  put_le<std::uint16_t>(bytes, static_cast<std::uint16_t>(params.depth()));
  put_le<std::uint16_t>(bytes, static_cast<std::uint16_t>(params.width()));
  put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(params.values()[i]));
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("save_checkpoint: cannot open " + tmp.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error("save_checkpoint: write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

PriorParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("load_checkpoint: cannot open " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < kCheckpointHeaderBytes) {
    throw Error("load_checkpoint: " + path.string() + " is truncated (header)");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error("load_checkpoint: " + path.string() + " has bad magic (expected EULF)");
  }
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw Error("load_checkpoint: unsupported version " + std::to_string(version));
  }
  const int depth = get_le<std::uint16_t>(bytes, pos);
  const int width = get_le<std::uint16_t>(bytes, pos);
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (depth < 1 || width < 1) {
    throw Error("load_checkpoint: invalid shape depth " + std::to_string(depth) + " width " +
                std::to_string(width));
  }
  const auto expected = static_cast<std::uint64_t>(PriorParams::count_for(depth, width));
  if (count != expected) {
    throw Error("load_checkpoint: parameter count " + std::to_string(count) +
                " does not match depth " + std::to_string(depth) + " width " +
                std::to_string(width) + " (expected " + std::to_string(expected) + ")");
  }
  if (bytes.size() != kCheckpointHeaderBytes + count * 8) {
    throw Error("load_checkpoint: " + path.string() + " has " + std::to_string(bytes.size()) +
                " bytes, expected " + std::to_string(kCheckpointHeaderBytes + count * 8));
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  }
  if (!values.allFinite()) {
    throw Error("load_checkpoint: non-finite parameter");
  }
  return PriorParams(depth, width, std::move(values));
}

}  // namespace eulerflow
