#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgvae/data.hpp"
#include "cgvae/rng.hpp"
#include "cgvae/tensor.hpp"

namespace cgvae {

enum class ModelKind { kGauss, kCat, kCgBpef };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kGauss;
  int input_dim = 0;            // D
  int d = 1;                    // latent dimensions
  int L = 1;                    // latent samples per datum
  int C = 2;                    // categories (cat only)
  int M = 0;                    // polynomial order (cgbpef only)
  int R = 0;                    // grid resolution (cgbpef only)
  double T_max = 1.0;
  double T_min = 0.5;
  std::vector<int> enc_hidden{128};
  std::vector<int> dec_hidden{128};

  void validate() const;
  int encoder_head_width() const;  // 2d | d*C | d*M
  int decoder_input_width() const;  // d | d*C | d
};

using ParamMap = std::map<std::string, Tensor>;

struct ModelParams {
  ParamMap values;
};

struct FreeEnergyReport {
  double term1 = 0.0;  // nats per datum
  double term2 = 0.0;
  double total = 0.0;  // term1 + term2
  double temperature = 1.0;
  long iteration = 0;
};

struct TrainConfig {
  double gamma = 1e-3;
  int batch = 100;
  long iters = 10000;
  std::uint64_t seed = 0;
  long valid_every = 100;
};

/// Uniform on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(int fan_in, int fan_out, Rng& rng);

struct AdamState {
  ParamMap m;
  ParamMap v;
  long t = 0;
};

/// Standard Adam update with bias correction (beta1=0.9, beta2=0.999,
/// eps=1e-8).
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state,
               double gamma);

/// T_max * (T_min/T_max)^min(1, 2t/t_total): exponential decay over the
/// first half of the run, then constant at T_min.
double anneal_temperature(long t, long t_total, double T_max, double T_min);

/// Frozen parameter-free noise: one tensor per latent sample l
/// (Gaussian eps for gauss, Gumbel for cat/cgbpef).
struct NoiseDraws {
  std::vector<Tensor> draws;
};

NoiseDraws draw_noise(const ModelConfig& config, std::size_t batch_size,
                      int L, Rng& rng);

ModelParams init_params(const ModelConfig& config, Rng& rng);

/// Per-datum free energy of a batch (rows in [0,1]^D). When grads is
/// non-null, also fills d(total)/d(param) for every parameter.
FreeEnergyReport free_energy(const Tensor& batch, const ModelParams& params,
                             const ModelConfig& config,
                             const NoiseDraws& noise, double T,
                             ParamMap* grads = nullptr);

struct HistoryRow {
  long iteration = 0;
  double temperature = 0.0;
  double term1 = 0.0;
  double term2 = 0.0;
  double total = 0.0;
  std::string split;
};

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;  // smallest validation total
  double best_valid_total = 0.0;
  std::vector<HistoryRow> history;
  bool diverged = false;
};

TrainResult train(const ModelConfig& model_config,
                  const TrainConfig& train_config, const Dataset& dataset);

/// Average free energy over a split at T = T_min with n_mc fresh noise
/// draws per datum; deterministic given the rng seed.
FreeEnergyReport evaluate(const ModelParams& params, const ModelConfig& config,
                          const Dataset& dataset, Split split_kind, Rng& rng,
                          int n_mc);

/// Flat binary snapshot: magic "CGV1", key=value config text block, then
/// named little-endian 64-bit-float arrays.
void save_model(const std::string& path, const ModelConfig& config,
                const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_model(const std::string& path);

}  // namespace cgvae
