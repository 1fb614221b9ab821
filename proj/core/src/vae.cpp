#include "cgvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cgvae/autodiff.hpp"
#include "cgvae/distributions.hpp"

namespace cgvae {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<int> layer_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGauss:
      return "gauss";
    case ModelKind::kCat:
      return "cat";
    case ModelKind::kCgBpef:
      return "cgbpef";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gauss") return ModelKind::kGauss;
  if (s == "cat") return ModelKind::kCat;
  if (s == "cgbpef") return ModelKind::kCgBpef;
  throw std::invalid_argument("unknown model kind: " + s);
}

void ModelConfig::validate() const {
  if (input_dim < 1 || d < 1 || L < 1)
    throw std::invalid_argument("ModelConfig: need input_dim, d, L >= 1");
  if (T_min <= 0.0 || T_max < T_min)
    throw std::invalid_argument("ModelConfig: need T_max >= T_min > 0");
  if (kind == ModelKind::kCat && C < 2)
    throw std::invalid_argument("ModelConfig: cat needs C >= 2");
  if (kind == ModelKind::kCgBpef) {
    if (R < 2 || M < 1)
      throw std::invalid_argument("ModelConfig: cgbpef needs R >= 2, M >= 1");
    if (M >= R - 1)
      throw std::invalid_argument("ModelConfig: cgbpef requires M < R-1");
  }
  for (int w : enc_hidden)
    if (w < 1) throw std::invalid_argument("ModelConfig: bad encoder width");
  for (int w : dec_hidden)
    if (w < 1) throw std::invalid_argument("ModelConfig: bad decoder width");
}

int ModelConfig::encoder_head_width() const {
  switch (kind) {
    case ModelKind::kGauss:
      return 2 * d;
    case ModelKind::kCat:
      return d * C;
    case ModelKind::kCgBpef:
      return d * M;
  }
  return 0;
}

int ModelConfig::decoder_input_width() const {
  return kind == ModelKind::kCat ? d * C : d;
}

Tensor xavier_init(int fan_in, int fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1)
    throw std::invalid_argument("xavier_init: fans must be >= 1");
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor w({static_cast<std::size_t>(fan_in), static_cast<std::size_t>(fan_out)});
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = (2.0 * rng.uniform() - 1.0) * a;
  return w;
}

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state,
               double gamma) {
  ++state.t;
  double bc1 = 1.0 - std::pow(kAdamBeta1, state.t);
  double bc2 = 1.0 - std::pow(kAdamBeta2, state.t);
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("adam_step: missing gradient for " + name);
    const Tensor& g = git->second;
    if (!g.same_shape(p))
      throw std::invalid_argument("adam_step: shape mismatch for " + name);
    Tensor& m = state.m.try_emplace(name, Tensor(p.shape(), 0.0)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(p.shape(), 0.0)).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= gamma * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

double anneal_temperature(long t, long t_total, double T_max, double T_min) {
  if (t < 0) throw std::invalid_argument("anneal_temperature: t < 0");
  if (t_total <= 0) return T_min;
  double progress = std::min(1.0, 2.0 * static_cast<double>(t) / t_total);
  return T_max * std::pow(T_min / T_max, progress);
}

NoiseDraws draw_noise(const ModelConfig& config, std::size_t batch_size,
                      int L, Rng& rng) {
  NoiseDraws noise;
  std::size_t d = config.d;
  for (int l = 0; l < L; ++l) {
    switch (config.kind) {
      case ModelKind::kGauss:
        noise.draws.push_back(rng.gaussian_tensor({batch_size, d}));
        break;
      case ModelKind::kCat:
        noise.draws.push_back(rng.gumbel_tensor(
            {batch_size * d, static_cast<std::size_t>(config.C)}));
        break;
      case ModelKind::kCgBpef:
        noise.draws.push_back(rng.gumbel_tensor(
            {batch_size * d, static_cast<std::size_t>(config.R)}));
        break;
    }
  }
  return noise;
}

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams params;
  auto add_stack = [&](const std::string& prefix, const std::vector<int>& w) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      params.values[prefix + "_W" + std::to_string(i)] =
          xavier_init(w[i], w[i + 1], rng);
      params.values[prefix + "_b" + std::to_string(i)] =
          Tensor({static_cast<std::size_t>(w[i + 1])}, 0.0);
    }
  };
  add_stack("enc", layer_widths(config.input_dim, config.enc_hidden,
                                config.encoder_head_width()));
  add_stack("dec", layer_widths(config.decoder_input_width(),
                                config.dec_hidden, config.input_dim));
  if (config.kind == ModelKind::kCgBpef)
    params.values["prior_A"] = Tensor({static_cast<std::size_t>(config.d),
                                       static_cast<std::size_t>(config.M)},
                                      0.0);
  return params;
}

FreeEnergyReport free_energy(const Tensor& batch, const ModelParams& params,
                             const ModelConfig& config,
                             const NoiseDraws& noise, double T,
                             ParamMap* grads) {
  config.validate();
  if (batch.shape().size() != 2 ||
      batch.cols() != static_cast<std::size_t>(config.input_dim))
    throw std::invalid_argument("free_energy: batch shape mismatch");
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch[i] < 0.0 || batch[i] > 1.0)
      throw std::invalid_argument("free_energy: batch entries must be in [0,1]");
  if (noise.draws.empty())
    throw std::invalid_argument("free_energy: need at least one noise draw");
  if (T <= 0.0) throw std::invalid_argument("free_energy: T must be positive");

  const std::size_t n = batch.rows();
  const std::size_t d = config.d;
  const int L = static_cast<int>(noise.draws.size());
  const bool want_grads = grads != nullptr;

  ad::Tape tape;
  std::map<std::string, ad::Value> leaves;
  for (const auto& [name, value] : params.values)
    leaves[name] = tape.leaf(value, want_grads);
  ad::Value x = tape.constant(batch);

  auto stack = [&](const std::string& prefix, ad::Value input,
                   std::size_t n_layers) {
    ad::Value h = input;
    for (std::size_t i = 0; i < n_layers; ++i) {
      std::string idx = std::to_string(i);
      h = tape.add_rowvec(tape.matmul(h, leaves.at(prefix + "_W" + idx)),
                          leaves.at(prefix + "_b" + idx));
      if (i + 1 < n_layers) h = tape.relu(h);
    }
    return h;
  };
  const std::size_t enc_layers = config.enc_hidden.size() + 1;
  const std::size_t dec_layers = config.dec_hidden.size() + 1;

  // kl_category_surrogate over Value logits, summed across rows
  auto surrogate = [&](ad::Value beta, ad::Value alpha) {
    ad::Value s = tape.softmax_rows(beta);
    ad::Value weighted = tape.row_sum(tape.mul(s, tape.sub(beta, alpha)));
    ad::Value lse_gap =
        tape.sub(tape.logsumexp_rows(alpha), tape.logsumexp_rows(beta));
    return tape.sum(tape.add(weighted, lse_gap));
  };

  ad::Value head = stack("enc", x, enc_layers);
  ad::Value term1;
  std::vector<ad::Value> z_per_l;

  switch (config.kind) {
    case ModelKind::kGauss: {
      ad::Value mu = tape.slice_cols(head, 0, d);
      ad::Value logvar = tape.slice_cols(head, d, d);
      ad::Value sd = tape.exp(tape.scale(logvar, 0.5));
      for (int l = 0; l < L; ++l) {
        ad::Value eps = tape.constant(noise.draws[l]);
        z_per_l.push_back(tape.add(mu, tape.mul(sd, eps)));
      }
      // 0.5 sum(exp(logvar) + mu^2 - 1 - logvar)
      ad::Value inner = tape.sub(
          tape.add_scalar(tape.add(tape.exp(logvar), tape.mul(mu, mu)), -1.0),
          logvar);
      term1 = tape.scale(tape.sum(inner), 0.5 / static_cast<double>(n));
      break;
    }
    case ModelKind::kCat: {
      std::size_t C = config.C;
      ad::Value logits = tape.reshape(head, {n * d, C});
      for (int l = 0; l < L; ++l) {
        ad::Value y = tape.softmax_rows(
            tape.add(logits, tape.constant(noise.draws[l])), T);
        z_per_l.push_back(tape.reshape(y, {n, d * C}));
      }
      ad::Value uniform = tape.constant(Tensor({n * d, C}, 0.0));
      term1 = tape.scale(surrogate(logits, uniform),
                         1.0 / static_cast<double>(n));
      break;
    }
    case ModelKind::kCgBpef: {
      std::size_t R = config.R;
      std::size_t M = config.M;
      Grid grid = make_grid(config.R);
      Tensor pt = power_table(grid, config.M);  // R x M
      Tensor pt_T({M, R});
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t m = 0; m < M; ++m) pt_T(m, r) = pt(r, m);
      ad::Value powers = tape.constant(std::move(pt_T));
      Tensor zeta_col({R, 1});
      for (std::size_t r = 0; r < R; ++r) zeta_col(r, 0) = grid.zeta[r];
      ad::Value zeta = tape.constant(std::move(zeta_col));

      ad::Value coeffs = tape.reshape(head, {n * d, M});
      ad::Value beta = tape.matmul(coeffs, powers);  // (n*d) x R
      for (int l = 0; l < L; ++l) {
        ad::Value y = tape.softmax_rows(
            tape.add(beta, tape.constant(noise.draws[l])), T);
        z_per_l.push_back(tape.reshape(tape.matmul(y, zeta), {n, d}));
      }
      ad::Value alpha =
          tape.tile_rows(tape.matmul(leaves.at("prior_A"), powers), n);
      term1 = tape.scale(surrogate(beta, alpha), 1.0 / static_cast<double>(n));
      break;
    }
  }

  ad::Value nll_acc;
  for (int l = 0; l < L; ++l) {
    ad::Value logits = stack("dec", z_per_l[l], dec_layers);
    ad::Value nll = tape.bernoulli_nll(logits, batch);
    nll_acc = l == 0 ? nll : tape.add(nll_acc, nll);
  }
  ad::Value term2 =
      tape.scale(nll_acc, 1.0 / (static_cast<double>(n) * L));
  ad::Value total = tape.add(term1, term2);

  if (want_grads) {
    tape.backward(total);
    grads->clear();
    for (const auto& [name, leaf] : leaves)
      (*grads)[name] = tape.grad(leaf);
  }

  FreeEnergyReport report;
  report.term1 = tape.value(term1)[0];
  report.term2 = tape.value(term2)[0];
  report.total = tape.value(total)[0];
  report.temperature = T;
  return report;
}

namespace {

Tensor gather_rows(const Tensor& items, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
  std::size_t dim = items.cols();
  Tensor out({end - begin, dim});
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < dim; ++j) out(i - begin, j) = items(idx[i], j);
  return out;
}

}  // namespace

FreeEnergyReport evaluate(const ModelParams& params, const ModelConfig& config,
                          const Dataset& dataset, Split split_kind, Rng& rng,
                          int n_mc) {
  if (n_mc < 1) throw std::invalid_argument("evaluate: n_mc must be >= 1");
  std::vector<std::size_t> idx = dataset.indices_of(split_kind);
  if (idx.empty()) throw std::invalid_argument("evaluate: empty split");
  constexpr std::size_t kChunk = 256;
  FreeEnergyReport avg;
  avg.temperature = config.T_min;
  std::size_t chunk_id = 0;
  for (std::size_t begin = 0; begin < idx.size(); begin += kChunk, ++chunk_id) {
    std::size_t end = std::min(idx.size(), begin + kChunk);
    Tensor batch = gather_rows(dataset.items, idx, begin, end);
    Rng stream = rng.split(chunk_id);
    NoiseDraws noise = draw_noise(config, end - begin, n_mc, stream);
    FreeEnergyReport r =
        free_energy(batch, params, config, noise, config.T_min);
    double w = static_cast<double>(end - begin);
    avg.term1 += w * r.term1;
    avg.term2 += w * r.term2;
  }
  avg.term1 /= static_cast<double>(idx.size());
  avg.term2 /= static_cast<double>(idx.size());
  avg.total = avg.term1 + avg.term2;
  return avg;
}

TrainResult train(const ModelConfig& model_config,
                  const TrainConfig& train_config, const Dataset& dataset) {
  model_config.validate();
  if (train_config.gamma <= 0.0 || train_config.batch < 1)
    throw std::invalid_argument("train: bad TrainConfig");

  Rng root(train_config.seed);
  Rng init_rng = root.split(1);
  Rng order_rng = root.split(2);
  Rng noise_rng = root.split(3);
  Rng eval_rng_proto = root.split(4);

  TrainResult result;
  result.final_params = init_params(model_config, init_rng);
  result.best_params = result.final_params;
  result.best_valid_total = std::numeric_limits<double>::infinity();
  if (train_config.iters == 0) return result;

  std::vector<std::size_t> train_idx = dataset.indices_of(Split::kTrain);
  if (train_idx.empty()) throw std::invalid_argument("train: empty train split");
  std::vector<std::size_t> valid_idx = dataset.indices_of(Split::kValid);
  // fall back to validating on the training split if none was assigned
  Split valid_split = valid_idx.empty() ? Split::kTrain : Split::kValid;

  AdamState adam;
  std::size_t cursor = train_idx.size();  // forces initial shuffle
  auto next_batch = [&]() {
    std::size_t b = std::min<std::size_t>(train_config.batch, train_idx.size());
    if (cursor + b > train_idx.size()) {
      for (std::size_t i = train_idx.size(); i > 1; --i)
        std::swap(train_idx[i - 1], train_idx[order_rng.next_u64() % i]);
      cursor = 0;
    }
    Tensor batch = gather_rows(dataset.items, train_idx, cursor, cursor + b);
    cursor += b;
    return batch;
  };

  auto validate = [&](long iteration, double T) {
    Rng eval_rng = eval_rng_proto.split(0);  // common noise across checkpoints
    FreeEnergyReport r = evaluate(result.final_params, model_config, dataset,
                                  valid_split, eval_rng, 1);
    result.history.push_back({iteration, T, r.term1, r.term2, r.total, "valid"});
    if (r.total < result.best_valid_total) {
      result.best_valid_total = r.total;
      result.best_params = result.final_params;
    }
  };

  validate(0, anneal_temperature(0, train_config.iters, model_config.T_max,
                                 model_config.T_min));

  for (long it = 1; it <= train_config.iters; ++it) {
    double T = anneal_temperature(it - 1, train_config.iters,
                                  model_config.T_max, model_config.T_min);
    Tensor batch = next_batch();
    NoiseDraws noise = draw_noise(model_config, batch.rows(), model_config.L,
                                  noise_rng);
    ParamMap grads;
    FreeEnergyReport report;
    try {
      report = free_energy(batch, result.final_params, model_config, noise, T,
                           &grads);
    } catch (const std::runtime_error&) {
      result.diverged = true;
      return result;
    }
    report.iteration = it;
    adam_step(result.final_params.values, grads, adam, train_config.gamma);

    if (it % train_config.valid_every == 0 || it == train_config.iters) {
      result.history.push_back(
          {it, T, report.term1, report.term2, report.total, "train"});
      validate(it, T);
    }
  }
  return result;
}

// ---- snapshot container ----

namespace {

std::string serialize_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "kind=" << to_string(c.kind) << "\n";
  out << "input_dim=" << c.input_dim << "\n";
  out << "d=" << c.d << "\n";
  out << "L=" << c.L << "\n";
  out << "C=" << c.C << "\n";
  out << "M=" << c.M << "\n";
  out << "R=" << c.R << "\n";
  out << "tmax=" << c.T_max << "\n";
  out << "tmin=" << c.T_min << "\n";
  auto widths = [](const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i)
      s += (i ? "," : "") + std::to_string(w[i]);
    return s;
  };
  out << "enc_hidden=" << widths(c.enc_hidden) << "\n";
  out << "dec_hidden=" << widths(c.dec_hidden) << "\n";
  return out.str();
}

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

ModelConfig parse_config(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "kind") c.kind = model_kind_from_string(val);
    else if (key == "input_dim") c.input_dim = std::stoi(val);
    else if (key == "d") c.d = std::stoi(val);
    else if (key == "L") c.L = std::stoi(val);
    else if (key == "C") c.C = std::stoi(val);
    else if (key == "M") c.M = std::stoi(val);
    else if (key == "R") c.R = std::stoi(val);
    else if (key == "tmax") c.T_max = std::stod(val);
    else if (key == "tmin") c.T_min = std::stod(val);
    else if (key == "enc_hidden") c.enc_hidden = parse_widths(val);
    else if (key == "dec_hidden") c.dec_hidden = parse_widths(val);
    else throw std::runtime_error("snapshot: unknown config key " + key);
  }
  return c;
}

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("snapshot: truncated file");
  return v;
}

}  // namespace

void save_model(const std::string& path, const ModelConfig& config,
                const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out.write("CGV1", 4);
  std::string cfg = serialize_config(config);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.values.size()));
  for (const auto& [name, tensor] : params.values) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out,
                             static_cast<std::uint32_t>(tensor.shape().size()));
    for (std::size_t dim : tensor.shape())
      write_raw<std::uint64_t>(out, dim);
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
}

std::pair<ModelConfig, ModelParams> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CGV1", 4) != 0)
    throw std::runtime_error("load_model: bad magic");
  auto cfg_len = read_raw<std::uint32_t>(in);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw std::runtime_error("load_model: truncated config");
  ModelConfig config = parse_config(cfg);
  ModelParams params;
  auto count = read_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto ndim = read_raw<std::uint32_t>(in);
    std::vector<std::size_t> shape(ndim);
    for (auto& dim : shape)
      dim = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_model: truncated array " + name);
    params.values[name] = std::move(t);
  }
  return {config, params};
}

}  // namespace cgvae
