// cgvae: command-line experiments for the coarse-grained VAE library.
//
// Subcommands mirror the library surface: train, verify-theorem1,
// verify-theorem2, bound-sweep, density, grad-check. Every run writes its
// resolved configuration next to its outputs so it can be replayed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgvae/data.hpp"
#include "cgvae/distributions.hpp"
#include "cgvae/divergence.hpp"
#include "cgvae/expfam.hpp"
#include "cgvae/rng.hpp"
#include "cgvae/vae.hpp"

namespace fs = std::filesystem;
using namespace cgvae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> default_temperatures() {
  std::vector<double> t;
  for (int i = 1; i <= 16; ++i) t.push_back(0.1 * i);
  return t;
}

struct OutDir {
  fs::path path;

  explicit OutDir(const std::string& dir) : path(dir) {
    fs::create_directories(path);
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream out(path / name, std::ios::binary);  // LF line endings
    if (!out)
      throw std::runtime_error("cannot open output file " +
                               (path / name).string());
    return out;
  }
};

void write_resolved_config(const OutDir& out, const CLI::App* cmd) {
  std::ofstream f = out.open("resolved_config.txt");
  f << "subcommand=" << cmd->get_name() << "\n";
  for (const CLI::Option* opt : cmd->get_options()) {
    std::string name = opt->get_lnames().empty() ? opt->get_name()
                                                 : opt->get_lnames().front();
    if (name.empty() || name == "help") continue;
    std::string value = opt->count() ? opt->results().front()
                                     : opt->get_default_str();
    f << name << "=" << value << "\n";
  }
}

// ---- train ----

struct TrainOpts {
  std::string kind = "cgbpef";
  int d = 8, L = 1, C = 10, M = 5, R = 51;
  double tmax = 1.0, tmin = 0.8, gamma = 1e-3;
  int batch = 100;
  long iters = 2000;
  long valid_every = 100;
  std::string enc_hidden = "128";
  std::string dec_hidden = "128";
  std::string mnist_images;
  std::size_t limit = 2000;
  int glyphs_per_class = 280;
  double glyph_noise = 0.05;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int cmd_train(const TrainOpts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);

  Rng data_rng(Rng(o.seed).split(100).seed());
  Dataset data;
  if (!o.mnist_images.empty())
    data = load_idx(o.mnist_images, o.limit);
  else
    data = synth_grid_digits(o.glyphs_per_class, o.glyph_noise, data_rng);
  data = split(std::move(data), {11.0, 1.0, 2.0}, data_rng);

  ModelConfig mc;
  mc.kind = model_kind_from_string(o.kind);
  mc.input_dim = static_cast<int>(data.dim());
  mc.d = o.d;
  mc.L = o.L;
  mc.C = o.C;
  mc.M = o.M;
  mc.R = o.R;
  mc.T_max = o.tmax;
  mc.T_min = o.tmin;
  mc.enc_hidden = parse_int_list(o.enc_hidden);
  mc.dec_hidden = parse_int_list(o.dec_hidden);

  TrainConfig tc;
  tc.gamma = o.gamma;
  tc.batch = o.batch;
  tc.iters = o.iters;
  tc.seed = o.seed;
  tc.valid_every = o.valid_every;

  TrainResult result = train(mc, tc, data);

  {
    std::ofstream f = out.open("history.csv");
    f << "iteration,temperature,term1,term2,L,split\n";
    for (const HistoryRow& row : result.history)
      f << row.iteration << "," << fmt(row.temperature) << ","
        << fmt(row.term1) << "," << fmt(row.term2) << "," << fmt(row.total)
        << "," << row.split << "\n";
  }
  save_model((out.path / "model.cgv").string(), mc, result.best_params);

  if (result.diverged) {
    std::ofstream f = out.open("report.txt");
    f << "status=diverged\n";
    std::cerr << "training diverged (non-finite loss)\n";
    return kExitDiverged;
  }

  std::ofstream f = out.open("report.txt");
  f << "status=ok\n";
  f << "kind=" << o.kind << "\n";
  if (o.iters > 0) {
    Rng eval_rng(Rng(o.seed).split(200).seed());
    Split test_split = data.indices_of(Split::kTest).empty() ? Split::kTrain
                                                             : Split::kTest;
    FreeEnergyReport test =
        evaluate(result.best_params, mc, data, test_split, eval_rng, 1);
    f << "test_term2=" << fmt(test.term2) << "\n";
    f << "test_L=" << fmt(test.total) << "\n";
    f << "best_valid_L=" << fmt(result.best_valid_total) << "\n";
  } else {
    f << "note=no training iterations; initialized model saved\n";
  }
  return kExitOk;
}

// ---- verify-theorem1 ----

struct Theorem1Opts {
  int triples = 500;
  int max_support = 200;
  long long N = 100000;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int cmd_verify_theorem1(const Theorem1Opts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);
  std::ofstream f = out.open("theorem1_summary.txt");
  bool ok = true;

  // discrete core: coarse KL never exceeds fine KL
  Rng rng(Rng(o.seed).split(11).seed());
  double worst_gap = 0.0;
  for (int i = 0; i < o.triples; ++i) {
    int R = 2 + static_cast<int>(rng.next_u64() % (o.max_support - 1));
    std::vector<double> p = sample_dirichlet(rng, 1.0, R);
    std::vector<double> q = sample_dirichlet(rng, 1.0, R);
    int K = 1 + static_cast<int>(rng.next_u64() % R);
    Partition part;
    part.K = K;
    part.cell.resize(R);
    for (int r = 0; r < K; ++r) part.cell[r] = r;  // keep every cell nonempty
    for (int r = K; r < R; ++r)
      part.cell[r] = static_cast<int>(rng.next_u64() % K);
    auto [fine, coarse] = check_information_monotonicity(p, q, part);
    worst_gap = std::max(worst_gap, coarse - fine);
  }
  bool mono_ok = worst_gap <= 1e-12;
  ok = ok && mono_ok;
  f << (mono_ok ? "PASS" : "FAIL") << " information-monotonicity: " << o.triples
    << " random triples, worst coarse-fine gap " << fmt(worst_gap) << "\n";

  // limit property: argmax frequencies equal softmax(logits) at any T
  Rng lim_rng(Rng(o.seed).split(12).seed());
  const std::vector<std::vector<double>> targets = {
      {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.5, 1.0 / 3, 1.0 / 6}};
  const std::vector<double> temps = {0.1, 0.5, 1.0};
  for (const auto& target : targets)
    for (double T : temps) {
      std::vector<double> logits(target.size());
      for (std::size_t r = 0; r < target.size(); ++r)
        logits[r] = std::log(target[r]);
      Rng stream = lim_rng.split(static_cast<std::uint64_t>(T * 1000) +
                                 target.size() * 7919);
      std::vector<double> freq = verify_limit_property(
          logits, T, static_cast<int>(o.N), stream);
      double max_dev = 0.0;
      for (std::size_t r = 0; r < target.size(); ++r)
        max_dev = std::max(max_dev, std::abs(freq[r] - target[r]));
      bool pass = max_dev <= 0.01;
      ok = ok && pass;
      f << (pass ? "PASS" : "FAIL") << " limit-property: T=" << fmt(T)
        << " max deviation " << fmt(max_dev) << "\n";
    }

  f << (ok ? "ALL PASS\n" : "FAILURES PRESENT\n");
  return ok ? kExitOk : kExitVerifyFail;
}

// ---- verify-theorem2 ----

struct Theorem2Opts {
  int instances = 100;
  int max_members = 10;
  int max_support = 50;
  int max_stats = 5;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int cmd_verify_theorem2(const Theorem2Opts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);
  std::ofstream f = out.open("theorem2_chain.csv");
  f << "instance,term1_random,term1_centroid,parametric_bound,"
       "nonparametric_bound\n";

  Rng rng(Rng(o.seed).split(21).seed());
  bool ok = true;
  for (int i = 0; i < o.instances; ++i) {
    Rng stream = rng.split(i);
    int K = 2 + static_cast<int>(stream.next_u64() % (o.max_support - 1));
    int S = 1 + static_cast<int>(stream.next_u64() % o.max_stats);
    int n = 1 + static_cast<int>(stream.next_u64() % o.max_members);
    DiscreteExpFam fam;
    fam.K = K;
    fam.S = S;
    fam.t = Tensor({static_cast<std::size_t>(K), static_cast<std::size_t>(S)});
    for (std::size_t j = 0; j < fam.t.size(); ++j)
      fam.t[j] = 2.0 * stream.uniform() - 1.0;

    std::vector<NaturalParam> phis(n);
    std::vector<std::vector<double>> pmfs;
    for (int k = 0; k < n; ++k) {
      phis[k].phi.resize(S);
      for (int s = 0; s < S; ++s) phis[k].phi[s] = stream.gaussian();
      pmfs.push_back(member_pmf(fam, phis[k].phi));
    }
    NaturalParam random_phi;
    random_phi.phi.resize(S);
    for (int s = 0; s < S; ++s) random_phi.phi[s] = stream.gaussian();

    double t1_random = term1_average(fam, phis, random_phi);
    auto [eta_star, phi_star] = bregman_centroid(fam, phis);
    double t1_centroid = term1_average(fam, phis, phi_star);
    double para = parametric_bound(fam, phis);
    double nonpara = nonparametric_bound(pmfs);

    f << i << "," << fmt(t1_random) << "," << fmt(t1_centroid) << ","
      << fmt(para) << "," << fmt(nonpara) << "\n";

    bool chain = t1_random >= para - 1e-9 &&
                 std::abs(t1_centroid - para) <= 1e-7 &&
                 para >= nonpara - 1e-9 && nonpara >= -1e-12;
    ok = ok && chain;
  }
  std::ofstream s = out.open("theorem2_summary.txt");
  s << (ok ? "ALL PASS\n" : "FAILURES PRESENT\n");
  return ok ? kExitOk : kExitVerifyFail;
}

// ---- bound-sweep ----

struct SweepOpts {
  std::string generator = "dirichlet05";
  int R = 100;
  int trials = 100;
  long long N = 100000;
  std::string temps;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "out";
};

int cmd_bound_sweep(const SweepOpts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);
  SimplexGenerator gen;
  if (o.generator == "uniform")
    gen = SimplexGenerator::kUniform;
  else if (o.generator == "dirichlet05")
    gen = SimplexGenerator::kDirichletHalf;
  else {
    std::cerr << "unknown generator: " << o.generator << "\n";
    return kExitUsage;
  }
  std::vector<double> temps =
      o.temps.empty() ? default_temperatures() : parse_double_list(o.temps);

  Rng rng(Rng(o.seed).split(31).seed());
  std::vector<KlSweepRecord> records =
      bound_sweep(gen, temps, o.trials, o.N, o.R, rng, o.threads);

  {
    std::ofstream f = out.open("sweep.csv");
    f << "generator,temperature,trial,kl_category,kl_z_mc\n";
    for (const KlSweepRecord& r : records)
      f << r.generator << "," << fmt(r.temperature) << "," << r.trial << ","
        << fmt(r.kl_category) << "," << fmt(r.kl_z_mc) << "\n";
  }
  {
    std::ofstream f = out.open("sweep_summary.csv");
    f << "temperature,kl_category_mean,kl_category_std,kl_z_mc_mean,"
         "kl_z_mc_std\n";
    for (std::size_t ti = 0; ti < temps.size(); ++ti) {
      double mc = 0, mz = 0, sc = 0, sz = 0;
      for (int tr = 0; tr < o.trials; ++tr) {
        const KlSweepRecord& r = records[ti * o.trials + tr];
        mc += r.kl_category;
        mz += r.kl_z_mc;
      }
      mc /= o.trials;
      mz /= o.trials;
      for (int tr = 0; tr < o.trials; ++tr) {
        const KlSweepRecord& r = records[ti * o.trials + tr];
        sc += (r.kl_category - mc) * (r.kl_category - mc);
        sz += (r.kl_z_mc - mz) * (r.kl_z_mc - mz);
      }
      sc = o.trials > 1 ? std::sqrt(sc / (o.trials - 1)) : 0.0;
      sz = o.trials > 1 ? std::sqrt(sz / (o.trials - 1)) : 0.0;
      f << fmt(temps[ti]) << "," << fmt(mc) << "," << fmt(sc) << "," << fmt(mz)
        << "," << fmt(sz) << "\n";
    }
  }
  return kExitOk;
}

// ---- density ----

struct DensityOpts {
  std::string alpha = "0.333333333333,0.333333333333,0.333333333333";
  std::string temps;
  long long N = 1000000;
  int bins = 50;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int cmd_density(const DensityOpts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);
  std::vector<double> alpha = parse_double_list(o.alpha);
  if (alpha.size() != 3) {
    std::cerr << "--alpha must list exactly 3 probabilities\n";
    return kExitUsage;
  }
  double s = alpha[0] + alpha[1] + alpha[2];
  for (double& a : alpha) a /= s;
  std::vector<double> temps =
      o.temps.empty() ? default_temperatures() : parse_double_list(o.temps);

  Rng rng(Rng(o.seed).split(41).seed());
  std::ofstream summary = out.open("density_summary.csv");
  summary << "temperature,vertex_fraction\n";
  for (std::size_t ti = 0; ti < temps.size(); ++ti) {
    Rng stream = rng.split(ti);
    DensityGrid grid = density_grid(alpha, temps[ti], o.N, o.bins, stream);
    char name[64];
    std::snprintf(name, sizeof(name), "density_T%.2f.csv", temps[ti]);
    std::ofstream f = out.open(name);
    f << "ix,iy,count\n";
    for (int ix = 0; ix < o.bins; ++ix)
      for (int iy = 0; iy < o.bins; ++iy)
        f << ix << "," << iy << "," << fmt(grid.at(ix, iy)) << "\n";
    Rng vstream = rng.split(1000 + ti);
    double vf = vertex_fraction(alpha, temps[ti], o.N, 0.99, vstream);
    summary << fmt(temps[ti]) << "," << fmt(vf) << "\n";
  }
  return kExitOk;
}

// ---- grad-check ----

struct GradCheckOpts {
  double step = 1e-5;
  double tolerance = 1e-4;
  bool corrupt = false;
  std::uint64_t seed = 0;
  std::string out = "out";
};

double model_grad_check(ModelKind kind, double step, bool corrupt,
                        std::uint64_t seed) {
  ModelConfig mc;
  mc.kind = kind;
  mc.input_dim = 16;
  mc.d = 2;
  mc.L = 2;
  mc.C = 3;
  mc.M = 3;
  mc.R = 11;
  mc.T_max = 1.0;
  mc.T_min = 0.6;
  mc.enc_hidden = {8};
  mc.dec_hidden = {8};

  Rng rng(seed);
  Rng init_rng = rng.split(1);
  Rng noise_rng = rng.split(2);
  Rng data_rng = rng.split(3);
  ModelParams params = init_params(mc, init_rng);
  Tensor batch({2, 16});
  for (std::size_t i = 0; i < batch.size(); ++i)
    batch[i] = data_rng.uniform() < 0.5 ? 0.0 : 1.0;
  NoiseDraws noise = draw_noise(mc, 2, mc.L, noise_rng);
  const double T = 0.7;

  ParamMap grads;
  free_energy(batch, params, mc, noise, T, &grads);
  if (corrupt) grads.begin()->second[0] += 1.0;  // test hook

  double max_err = 0.0;
  for (auto& [name, g] : grads) {
    Tensor& p = params.values.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double orig = p[i];
      p[i] = orig + step;
      double fp = free_energy(batch, params, mc, noise, T).total;
      p[i] = orig - step;
      double fm = free_energy(batch, params, mc, noise, T).total;
      p[i] = orig;
      double central = (fp - fm) / (2.0 * step);
      double err = std::abs(g[i] - central) /
                   (std::abs(g[i]) + std::abs(central) + 1e-12);
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

int cmd_grad_check(const GradCheckOpts& o, const CLI::App* cmd) {
  OutDir out(o.out);
  write_resolved_config(out, cmd);
  std::ofstream f = out.open("grad_check.txt");
  bool ok = true;
  for (ModelKind kind :
       {ModelKind::kGauss, ModelKind::kCat, ModelKind::kCgBpef}) {
    double err = model_grad_check(kind, o.step, o.corrupt, o.seed);
    bool pass = err < o.tolerance;
    ok = ok && pass;
    f << (pass ? "PASS" : "FAIL") << " " << to_string(kind)
      << " max relative error " << fmt(err) << "\n";
    std::cout << (pass ? "PASS " : "FAIL ") << to_string(kind) << " " << fmt(err)
              << "\n";
  }
  return ok ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-grained bounded-polynomial exponential-family VAE"};
  app.require_subcommand(1);
  app.set_config("--config")->configurable(false);
  app.allow_config_extras(false);

  TrainOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train a VAE model");
  train_cmd->add_option("--kind", train_opts.kind, "gauss | cat | cgbpef")
      ->capture_default_str();
  train_cmd->add_option("--d", train_opts.d)->capture_default_str();
  train_cmd->add_option("--L", train_opts.L)->capture_default_str();
  train_cmd->add_option("--C", train_opts.C)->capture_default_str();
  train_cmd->add_option("--M", train_opts.M)->capture_default_str();
  train_cmd->add_option("--R", train_opts.R)->capture_default_str();
  train_cmd->add_option("--tmax", train_opts.tmax)->capture_default_str();
  train_cmd->add_option("--tmin", train_opts.tmin)->capture_default_str();
  train_cmd->add_option("--gamma", train_opts.gamma)->capture_default_str();
  train_cmd->add_option("--batch", train_opts.batch)->capture_default_str();
  train_cmd->add_option("--iters", train_opts.iters)->capture_default_str();
  train_cmd->add_option("--valid-every", train_opts.valid_every)
      ->capture_default_str();
  train_cmd->add_option("--enc-hidden", train_opts.enc_hidden)
      ->capture_default_str();
  train_cmd->add_option("--dec-hidden", train_opts.dec_hidden)
      ->capture_default_str();
  train_cmd->add_option("--mnist-images", train_opts.mnist_images,
                        "IDX image file; synthetic glyphs when absent");
  train_cmd->add_option("--limit", train_opts.limit)->capture_default_str();
  train_cmd->add_option("--glyphs-per-class", train_opts.glyphs_per_class)
      ->capture_default_str();
  train_cmd->add_option("--glyph-noise", train_opts.glyph_noise)
      ->capture_default_str();
  train_cmd->add_option("--seed", train_opts.seed)->capture_default_str();
  train_cmd->add_option("--out", train_opts.out)->capture_default_str();

  Theorem1Opts t1_opts;
  CLI::App* t1_cmd = app.add_subcommand(
      "verify-theorem1", "information monotonicity + limit property checks");
  t1_cmd->add_option("--triples", t1_opts.triples)->capture_default_str();
  t1_cmd->add_option("--max-support", t1_opts.max_support)
      ->capture_default_str();
  t1_cmd->add_option("--N", t1_opts.N)->capture_default_str();
  t1_cmd->add_option("--seed", t1_opts.seed)->capture_default_str();
  t1_cmd->add_option("--out", t1_opts.out)->capture_default_str();

  Theorem2Opts t2_opts;
  CLI::App* t2_cmd = app.add_subcommand(
      "verify-theorem2", "lower-bound chain over random discrete families");
  t2_cmd->add_option("--instances", t2_opts.instances)->capture_default_str();
  t2_cmd->add_option("--max-members", t2_opts.max_members)
      ->capture_default_str();
  t2_cmd->add_option("--max-support", t2_opts.max_support)
      ->capture_default_str();
  t2_cmd->add_option("--max-stats", t2_opts.max_stats)->capture_default_str();
  t2_cmd->add_option("--seed", t2_opts.seed)->capture_default_str();
  t2_cmd->add_option("--out", t2_opts.out)->capture_default_str();

  SweepOpts sweep_opts;
  CLI::App* sweep_cmd = app.add_subcommand(
      "bound-sweep", "category KL vs Monte-Carlo z-KL over temperatures");
  sweep_cmd->add_option("--generator", sweep_opts.generator,
                        "uniform | dirichlet05")
      ->capture_default_str();
  sweep_cmd->add_option("--R", sweep_opts.R)->capture_default_str();
  sweep_cmd->add_option("--trials", sweep_opts.trials)->capture_default_str();
  sweep_cmd->add_option("--N", sweep_opts.N)->capture_default_str();
  sweep_cmd->add_option("--temps", sweep_opts.temps,
                        "comma list; default 0.1..1.6");
  sweep_cmd->add_option("--seed", sweep_opts.seed)->capture_default_str();
  sweep_cmd->add_option("--threads", sweep_opts.threads)
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_opts.out)->capture_default_str();

  DensityOpts density_opts;
  CLI::App* density_cmd = app.add_subcommand(
      "density", "Monte-Carlo Concrete density grids over the 2-simplex");
  density_cmd->add_option("--alpha", density_opts.alpha)
      ->capture_default_str();
  density_cmd->add_option("--temps", density_opts.temps,
                          "comma list; default 0.1..1.6");
  density_cmd->add_option("--N", density_opts.N)->capture_default_str();
  density_cmd->add_option("--bins", density_opts.bins)->capture_default_str();
  density_cmd->add_option("--seed", density_opts.seed)->capture_default_str();
  density_cmd->add_option("--out", density_opts.out)->capture_default_str();

  GradCheckOpts gc_opts;
  CLI::App* gc_cmd = app.add_subcommand(
      "grad-check", "finite-difference check of the free-energy gradients");
  gc_cmd->add_option("--step", gc_opts.step)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_opts.tolerance)->capture_default_str();
  gc_cmd->add_flag("--corrupt-gradient", gc_opts.corrupt)
      ->group("");  // test hook, hidden
  gc_cmd->add_option("--seed", gc_opts.seed)->capture_default_str();
  gc_cmd->add_option("--out", gc_opts.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts, train_cmd);
    if (t1_cmd->parsed()) return cmd_verify_theorem1(t1_opts, t1_cmd);
    if (t2_cmd->parsed()) return cmd_verify_theorem2(t2_opts, t2_cmd);
    if (sweep_cmd->parsed()) return cmd_bound_sweep(sweep_opts, sweep_cmd);
    if (density_cmd->parsed()) return cmd_density(density_opts, density_cmd);
    if (gc_cmd->parsed()) return cmd_grad_check(gc_opts, gc_cmd);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
  return kExitUsage;
}
