// bcr: command-line front end. Every run prints its resolved config as a
// JSON object on line 1; series follow as CSV and scalar summaries as JSON.
// Exit status: 0 ok, 1 failed check, 2 validation failure, 3 I/O or
// integrity error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <random>
#include <string>

#include "bcr/apps.hpp"
#include "bcr/bcrnet.hpp"
#include "bcr/error.hpp"
#include "bcr/nsform.hpp"
#include "bcr/persist.hpp"
#include "bcr/train.hpp"
#include "bcr/wavelet.hpp"

using nlohmann::json;
using namespace bcr;

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t default_seed() {
  const char* env = std::getenv("BCR_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ValidationError("BCR_SEED must be a non-negative integer");
  return v;
}

void print_config(const std::string& command, json options) {
  options["command"] = command;
  std::cout << options.dump() << '\n';
}

// "full" or an odd integer.
int parse_band(const std::string& s, int L) {
  if (s == "full") return nsform::full_band(L);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("--nb must be an odd integer or 'full', got '" + s + "'");
}

int grid_level(std::size_t size, int dim) {
  std::size_t side = size;
  if (dim == 2) {
    side = 1;
    while (side * side < size) side *= 2;
    if (side * side != size) throw ValidationError("2D operator size is not a square of a power of two");
  }
  return wavelet::exact_log2(side);
}

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  }
  return a;
}

std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

std::vector<double> dense_matvec(const Eigen::MatrixXd& a, const std::vector<double>& v) {
  const Eigen::VectorXd u = a * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return {u.data(), u.data() + u.size()};
}

double rel_diff(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

nsform::KernelSpec named_kernel(const std::string& name, int dim, int L) {
  if (name == "identity") return nsform::explicit_matrix(Eigen::MatrixXd::Identity(1 << (L * dim), 1 << (L * dim)), dim);
  if (name == "invdist") return nsform::inverse_distance_kernel(dim, std::ldexp(1.0, -L));
  throw ValidationError("unknown kernel '" + name + "' (expected identity or invdist)");
}

// ---- filters

struct FiltersArgs {
  int p = 3;
};

int run_filters(const FiltersArgs& a) {
  print_config("filters", {{"p", a.p}});
  const wavelet::FilterPair& f = wavelet::make_filters(a.p);
  const wavelet::FilterResiduals r = wavelet::check_filters(f);
  json out = {{"p", f.p},
              {"h", f.h},
              {"g", f.g},
              {"g_offset", f.g_offset},
              {"residuals",
               {{"unit_norm", r.unit_norm},
                {"shift_orthogonality", r.shift_orthogonality},
                {"dc_gain", r.dc_gain},
                {"quadrature_mirror", r.quadrature_mirror},
                {"vanishing_moments", r.vanishing_moments}}}};
  std::cout << out.dump() << '\n';
  return 0;
}

// ---- compress

struct CompressArgs {
  std::string input;
  std::string out;
  int p = 3;
  int l0 = -1;
  std::string nb = "5";
  int dim = 1;
  int probes = 20;
  std::uint64_t seed = 0;
};

int run_compress(const CompressArgs& a) {
  const Eigen::MatrixXd A = persist::to_matrix(persist::read_tensor(a.input), a.input);
  if (A.rows() != A.cols()) throw ValidationError("operator must be square");
  const int L = grid_level(static_cast<std::size_t>(A.rows()), a.dim);
  const int l0 = a.l0 >= 0 ? a.l0 : wavelet::min_coarse_level(a.p);
  const int nb = parse_band(a.nb, L);
  print_config("compress", {{"input", a.input}, {"out", a.out}, {"p", a.p}, {"l0", l0}, {"nb", nb},
                            {"dim", a.dim}, {"L", L}, {"probes", a.probes}, {"seed", a.seed}});
  const nsform::NonstandardForm ns = nsform::decompose_operator(A, a.p, l0, nb, a.dim);
  persist::write_nsform(a.out, ns);
  std::cout << "level,block,kept_energy,dropped_energy\n";
  for (const auto& lv : ns.levels) {
    for (std::size_t b = 0; b < lv.blocks.size(); ++b) {
      std::cout << lv.level << ',' << b + 1 << ',' << lv.kept_energy[b] << ',' << lv.dropped_energy[b] << '\n';
    }
  }
  std::mt19937_64 rng(a.seed);
  double worst = 0.0;
  double mean = 0.0;
  for (int i = 0; i < a.probes; ++i) {
    const auto v = gaussian_vector(rng, static_cast<std::size_t>(A.rows()));
    const double e = rel_diff(nsform::apply(ns, v), dense_matvec(A, v));
    worst = std::max(worst, e);
    mean += e / a.probes;
  }
  std::cout << json{{"probes", a.probes}, {"mean_rel_error", mean}, {"max_rel_error", worst}}.dump() << '\n';
  return 0;
}

// ---- apply

struct ApplyArgs {
  std::string ns;
  std::string vec;
  std::string out;
  std::string compare_dense;
};

int run_apply(const ApplyArgs& a) {
  print_config("apply", {{"ns", a.ns}, {"vec", a.vec}, {"out", a.out}, {"compare_dense", a.compare_dense}});
  const nsform::NonstandardForm ns = persist::read_nsform(a.ns);
  const persist::RawTensor v = persist::read_tensor(a.vec);
  if (v.data.size() != ns.size()) {
    throw ValidationError("vector has " + std::to_string(v.data.size()) + " entries, form expects " +
                          std::to_string(ns.size()));
  }
  const Clock::time_point start = Clock::now();
  const std::vector<double> u = nsform::apply(ns, v.data);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  persist::write_tensor(a.out, persist::RawTensor{v.extents, u});
  json summary = {{"n", u.size()}, {"flops", nsform::flop_count(ns)}, {"wall_time_s", secs}};
  if (!a.compare_dense.empty()) {
    const Eigen::MatrixXd A = persist::to_matrix(persist::read_tensor(a.compare_dense), a.compare_dense);
    if (static_cast<std::size_t>(A.rows()) != u.size() || A.rows() != A.cols()) {
      throw ValidationError("dense operator does not match the form's size");
    }
    summary["rel_error"] = rel_diff(u, dense_matvec(A, v.data));
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

// ---- bench

struct BenchArgs {
  std::string kernel = "invdist";
  int lmin = 7;
  int lmax = 12;
  int nb = 5;
  int p = 3;
  int l0 = -1;
  int reps = 5;
};

int run_bench(const BenchArgs& a) {
  const int l0 = a.l0 >= 0 ? a.l0 : wavelet::min_coarse_level(a.p);
  print_config("bench", {{"kernel", a.kernel}, {"lmin", a.lmin}, {"lmax", a.lmax}, {"nb", a.nb}, {"p", a.p},
                         {"l0", l0}, {"reps", a.reps}});
  if (a.lmin <= l0 || a.lmax < a.lmin) throw ValidationError("need l0 < lmin <= lmax");
  if (a.lmax > 13) throw ValidationError("--lmax above 13 needs a dense operator too large for this tool");
  if (a.reps < 1) throw ValidationError("--reps must be positive");
  std::cout << "L,N,flops,flop_ratio,wall_time_s,wall_ratio\n";
  std::mt19937_64 rng(1);
  double prev_flops = 0.0;
  double prev_wall = 0.0;
  double max_flop_ratio = 0.0;
  double max_wall_ratio = 0.0;
  for (int L = a.lmin; L <= a.lmax; ++L) {
    const nsform::NonstandardForm ns =
        nsform::decompose_operator(nsform::project_kernel(named_kernel(a.kernel, 1, L), L), a.p, l0, a.nb);
    const auto v = gaussian_vector(rng, ns.size());
    const double flops = static_cast<double>(nsform::apply_instrumented(ns, v).flops);
    // best of reps, each rep long enough to be measurable
    const int inner = std::max(1, (1 << 22) >> L);
    volatile double sink = 0.0;
    double best = 1e300;
    for (int r = 0; r < a.reps; ++r) {
      const Clock::time_point start = Clock::now();
      for (int i = 0; i < inner; ++i) sink = sink + nsform::apply(ns, v)[0];
      best = std::min(best, std::chrono::duration<double>(Clock::now() - start).count() / inner);
    }
    std::cout << L << ',' << ns.size() << ',' << flops << ',';
    if (prev_flops > 0.0) {
      max_flop_ratio = std::max(max_flop_ratio, flops / prev_flops);
      max_wall_ratio = std::max(max_wall_ratio, best / prev_wall);
      std::cout << flops / prev_flops << ',' << best << ',' << best / prev_wall << '\n';
    } else {
      std::cout << ',' << best << ",\n";
    }
    prev_flops = flops;
    prev_wall = best;
  }
  std::cout << json{{"max_flop_ratio", max_flop_ratio}, {"max_wall_ratio", max_wall_ratio},
                    {"linear", max_flop_ratio <= 2.3}}
                   .dump()
            << '\n';
  return max_flop_ratio <= 2.3 ? 0 : 1;
}

// ---- decay

struct DecayArgs {
  std::string kernel = "invdist";
  int l = 10;
  int p = 3;
  int l0 = -1;
};

int run_decay(const DecayArgs& a) {
  const int l0 = a.l0 >= 0 ? a.l0 : wavelet::min_coarse_level(a.p);
  print_config("decay", {{"kernel", a.kernel}, {"l", a.l}, {"p", a.p}, {"l0", l0}});
  if (a.l > 12) throw ValidationError("--l above 12 needs a dense operator too large for this tool");
  const nsform::NonstandardForm ns = nsform::decompose_operator(
      nsform::project_kernel(named_kernel(a.kernel, 1, a.l), a.l), a.p, l0, nsform::full_band(a.l));
  std::cout << "level,block,offset,max_abs\n";
  for (const auto& lv : ns.levels) {
    for (int b = 0; b < ns.block_count(); ++b) {
      const std::vector<double> m = nsform::max_abs_by_offset(ns, lv.level, b);
      for (std::size_t off = 0; off < m.size(); ++off) {
        std::cout << lv.level << ',' << b + 1 << ',' << off << ',' << m[off] << '\n';
      }
    }
  }
  return 0;
}

// ---- kernel, vector

struct KernelArgs {
  std::string kernel = "invdist";
  int l = 6;
  int dim = 1;
  std::string out;
};

int run_kernel(const KernelArgs& a) {
  print_config("kernel", {{"kernel", a.kernel}, {"l", a.l}, {"dim", a.dim}, {"out", a.out}});
  if (a.l < 1 || a.l * a.dim > 13) throw ValidationError("--l must give between 2 and 8192 unknowns");
  const Eigen::MatrixXd A = nsform::project_kernel(named_kernel(a.kernel, a.dim, a.l), a.l);
  persist::write_tensor(a.out, persist::to_raw(A));
  std::cout << json{{"rows", A.rows()}, {"cols", A.cols()}}.dump() << '\n';
  return 0;
}

struct VectorArgs {
  std::size_t n = 64;
  std::uint64_t seed = 0;
  std::string out;
};

int run_vector(const VectorArgs& a) {
  print_config("vector", {{"n", a.n}, {"seed", a.seed}, {"out", a.out}});
  if (a.n == 0) throw ValidationError("--n must be positive");
  std::mt19937_64 rng(a.seed);
  persist::write_tensor(a.out, persist::RawTensor{{a.n}, gaussian_vector(rng, a.n)});
  return 0;
}

// ---- gen

struct GenArgs {
  std::string task = "green1d";
  int n = 64;
  int coarse = 8;
  int train = 5000;
  int test = 1000;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

int run_gen(const GenArgs& a) {
  apps::DatasetDescriptor d;
  d.task = apps::parse_task(a.task);
  d.dim = d.task == apps::Task::Green2d ? 2 : 1;
  d.n = a.n;
  d.coarse = a.coarse;
  d.n_train = a.train;
  d.n_test = a.test;
  d.seed = a.seed;
  json cfg = persist::descriptor_to_json(d);
  cfg["out"] = a.out;
  cfg["threads"] = a.threads;
  print_config("gen", cfg);
  const Clock::time_point start = Clock::now();
  const apps::Dataset data = apps::make_dataset(d, a.threads);
  persist::write_dataset(a.out, data);
  std::cout << json{{"train", data.train.size()}, {"test", data.test.size()},
                    {"wall_time_s", std::chrono::duration<double>(Clock::now() - start).count()}}
                   .dump()
            << '\n';
  return 0;
}

// ---- train

struct TrainArgs {
  std::string data;
  std::string out;
  int alpha = 2;
  int k = 5;
  int nb = 3;
  int p = 3;
  int l0 = 3;
  std::string mode = "lc";
  std::string activation = "relu";
  std::string transform_init = "wavelet";
  bool freeze_transform = false;
  int epochs = 10;
  double lr = 1e-3;
  int batch = 0;
  std::uint64_t max_steps = 0;
  std::uint64_t seed = 0;
  int repeats = 1;
  int threads = 1;
};

int run_train(const TrainArgs& a) {
  const apps::Dataset data = persist::read_dataset(a.data);
  bcrnet::NetConfig cfg;
  cfg.dim = data.descriptor.dim;
  cfg.L = wavelet::exact_log2(static_cast<std::size_t>(data.descriptor.n));
  cfg.L0 = a.l0;
  cfg.p = a.p;
  cfg.n_b = a.nb;
  cfg.alpha = a.alpha;
  cfg.K = a.k;
  cfg.mode = bcrnet::parse_mode(a.mode);
  cfg.activation = layers::parse_activation(a.activation);
  cfg.transform_init = bcrnet::parse_transform_init(a.transform_init);
  cfg.transform_trainable = !a.freeze_transform;
  if (a.repeats < 1) throw ValidationError("--repeats must be positive");
  train::TrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.max_steps = a.max_steps;
  opt.nadam.lr = a.lr;
  opt.threads = a.threads;
  json resolved = {{"data", a.data},
                   {"out", a.out},
                   {"network", persist::config_to_json(cfg)},
                   {"epochs", a.epochs},
                   {"lr", a.lr},
                   {"batch", a.batch > 0 ? a.batch : train::default_batch_size(data.train.size())},
                   {"max_steps", a.max_steps},
                   {"seed", a.seed},
                   {"repeats", a.repeats},
                   {"threads", a.threads}};
  print_config("train", resolved);
  cfg.validate();

  std::cout << "repeat,epoch,train_eps,test_eps,loss,wall_time_s\n";
  std::vector<train::TrainResult> runs;
  for (int r = 0; r < a.repeats; ++r) {
    opt.on_epoch = [r](const train::EpochMetrics& m) {
      std::cout << r << ',' << m.epoch << ',' << m.train_eps << ',' << m.test_eps << ',' << m.loss << ','
                << m.wall_time_s << std::endl;
    };
    runs.push_back(train::train_loop(cfg, data, opt, a.seed + static_cast<std::uint64_t>(r)));
  }
  if (!a.out.empty()) {
    persist::write_checkpoint(a.out, runs.front().model,
                              {{"seed", a.seed}, {"steps", runs.front().steps}, {"data", a.data}});
  }
  const train::RepeatSummary s = train::summarize(runs);
  std::cout << json{{"repeats", a.repeats},
                    {"train_eps", s.train_eps},
                    {"test_eps", s.test_eps},
                    {"mean_train_eps", s.mean_train},
                    {"mean_test_eps", s.mean_test},
                    {"spread_test_eps", s.spread_test}}
                   .dump()
            << '\n';
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string model;
  std::string data;
  int threads = 1;
};

int run_eval(const EvalArgs& a) {
  print_config("eval", {{"model", a.model}, {"data", a.data}, {"threads", a.threads}});
  const train::Model model = persist::read_checkpoint(a.model);
  const apps::Dataset data = persist::read_dataset(a.data);
  std::cout << json{{"train_eps", train::mean_relative_error(model, data.train, a.threads)},
                    {"test_eps", train::mean_relative_error(model, data.test, a.threads)},
                    {"n_train", data.train.size()},
                    {"n_test", data.test.size()}}
                   .dump()
            << '\n';
  return 0;
}

// ---- lintest

struct LintestArgs {
  int n = 64;
  int p = 3;
  std::string nb = "full";
  int dim = 1;
  int l0 = -1;
  int trials = 10;
  std::uint64_t seed = 0;
};

int run_lintest(const LintestArgs& a) {
  if (a.n < 2 || (a.n & (a.n - 1)) != 0) throw ValidationError("--n must be a power of two");
  if (a.dim == 2 && a.n > 32) throw ValidationError("--n above 32 in 2D needs a dense operator too large for this tool");
  const int L = wavelet::exact_log2(static_cast<std::size_t>(a.n));
  const int l0 = a.l0 >= 0 ? a.l0 : wavelet::min_coarse_level(a.p);
  const int nb = parse_band(a.nb, L);
  print_config("lintest", {{"n", a.n}, {"p", a.p}, {"nb", nb}, {"dim", a.dim}, {"l0", l0}, {"trials", a.trials},
                           {"seed", a.seed}});
  const int size = a.dim == 1 ? a.n : a.n * a.n;
  std::mt19937_64 rng(a.seed);
  const Eigen::MatrixXd A = gaussian_matrix(rng, size);
  const nsform::NonstandardForm ns = nsform::decompose_operator(A, a.p, l0, nb, a.dim);
  const bcrnet::Network net = bcrnet::build_linear_net(ns);
  const bool full = nb >= nsform::full_band(L);
  double vs_apply = 0.0;
  double vs_dense = 0.0;
  for (int t = 0; t < a.trials; ++t) {
    const auto v = gaussian_vector(rng, static_cast<std::size_t>(size));
    const std::vector<double> y = net.evaluate(field_tensor(v, a.dim)).values();
    vs_apply = std::max(vs_apply, rel_diff(y, nsform::apply(ns, v)));
    if (full) vs_dense = std::max(vs_dense, rel_diff(y, dense_matvec(A, v)));
  }
  json out = {{"max_deviation_vs_apply", vs_apply}};
  bool ok = vs_apply <= 1e-12;
  if (full) {
    out["max_deviation_vs_dense"] = vs_dense;
    ok = ok && vs_dense <= 1e-10;
  }
  out["pass"] = ok;
  std::cout << out.dump() << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet nonstandard-form operators and BCR-Net"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  bool seed_given = false;

  FiltersArgs filters;
  auto* c_filters = app.add_subcommand("filters", "Print a Daubechies filter pair and its residuals");
  c_filters->add_option("--p", filters.p, "Vanishing moments")->capture_default_str();

  CompressArgs compress;
  auto* c_compress = app.add_subcommand("compress", "Build the nonstandard form of a dense operator");
  c_compress->add_option("--input", compress.input, "Dense operator tensor")->required();
  c_compress->add_option("--out", compress.out, "Output form")->required();
  c_compress->add_option("--p", compress.p)->capture_default_str();
  c_compress->add_option("--l0", compress.l0, "Coarse level (default ceil(log2 2p))");
  c_compress->add_option("--nb", compress.nb, "Odd band width or 'full'")->capture_default_str();
  c_compress->add_option("--dim", compress.dim)->check(CLI::IsMember({1, 2}))->capture_default_str();
  c_compress->add_option("--probes", compress.probes)->capture_default_str();
  c_compress->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });

  ApplyArgs apply;
  auto* c_apply = app.add_subcommand("apply", "Multiply a vector by a stored nonstandard form");
  c_apply->add_option("--ns", apply.ns)->required();
  c_apply->add_option("--vec", apply.vec)->required();
  c_apply->add_option("--out", apply.out)->required();
  c_apply->add_option("--compare-dense", apply.compare_dense, "Dense operator for an error report");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Flop and wall-time scaling of apply");
  c_bench->add_option("--kernel", bench.kernel)->check(CLI::IsMember({"identity", "invdist"}))->capture_default_str();
  c_bench->add_option("--lmin", bench.lmin)->capture_default_str();
  c_bench->add_option("--lmax", bench.lmax)->capture_default_str();
  c_bench->add_option("--nb", bench.nb)->capture_default_str();
  c_bench->add_option("--p", bench.p)->capture_default_str();
  c_bench->add_option("--l0", bench.l0);
  c_bench->add_option("--reps", bench.reps)->capture_default_str();

  DecayArgs decay;
  auto* c_decay = app.add_subcommand("decay", "Largest detail entry per periodic offset");
  c_decay->add_option("--kernel", decay.kernel)->check(CLI::IsMember({"identity", "invdist"}))->capture_default_str();
  c_decay->add_option("--l", decay.l)->capture_default_str();
  c_decay->add_option("--p", decay.p)->capture_default_str();
  c_decay->add_option("--l0", decay.l0);

  KernelArgs kernel;
  auto* c_kernel = app.add_subcommand("kernel", "Write a projected dense operator");
  c_kernel->add_option("--kernel", kernel.kernel)->check(CLI::IsMember({"identity", "invdist"}))->capture_default_str();
  c_kernel->add_option("--l", kernel.l, "Level; the grid has 2^l points per axis")->capture_default_str();
  c_kernel->add_option("--dim", kernel.dim)->check(CLI::IsMember({1, 2}))->capture_default_str();
  c_kernel->add_option("--out", kernel.out)->required();

  VectorArgs vec;
  auto* c_vector = app.add_subcommand("vector", "Write a standard normal vector");
  c_vector->add_option("--n", vec.n)->capture_default_str();
  c_vector->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });
  c_vector->add_option("--out", vec.out)->required();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a dataset");
  c_gen->add_option("--task", gen.task)->capture_default_str();
  c_gen->add_option("--n", gen.n)->capture_default_str();
  c_gen->add_option("--coarse", gen.coarse)->capture_default_str();
  c_gen->add_option("--train", gen.train)->capture_default_str();
  c_gen->add_option("--test", gen.test)->capture_default_str();
  c_gen->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });
  c_gen->add_option("--out", gen.out)->required();
  c_gen->add_option("--threads", gen.threads)->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a BCR-Net");
  c_train->add_option("--data", tr.data)->required();
  c_train->add_option("--out", tr.out, "Checkpoint of the first repeat");
  c_train->add_option("--alpha", tr.alpha)->capture_default_str();
  c_train->add_option("--k", tr.k)->capture_default_str();
  c_train->add_option("--nb", tr.nb)->capture_default_str();
  c_train->add_option("--p", tr.p)->capture_default_str();
  c_train->add_option("--l0", tr.l0)->capture_default_str();
  c_train->add_option("--mode", tr.mode)->check(CLI::IsMember({"lc", "conv"}))->capture_default_str();
  c_train->add_option("--activation", tr.activation)->check(CLI::IsMember({"relu", "sigmoid"}))->capture_default_str();
  c_train->add_option("--transform-init", tr.transform_init)->check(CLI::IsMember({"wavelet", "random"}))->capture_default_str();
  c_train->add_flag("--freeze-transform", tr.freeze_transform);
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--lr", tr.lr)->capture_default_str();
  c_train->add_option("--batch", tr.batch, "Batch size (default max(1, 2% of the training set))");
  c_train->add_option("--max-steps", tr.max_steps);
  c_train->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });
  c_train->add_option("--repeats", tr.repeats)->capture_default_str();
  c_train->add_option("--threads", tr.threads)->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Relative errors of a checkpoint on a dataset");
  c_eval->add_option("--model", ev.model)->required();
  c_eval->add_option("--data", ev.data)->required();
  c_eval->add_option("--threads", ev.threads)->capture_default_str();

  LintestArgs lin;
  auto* c_lin = app.add_subcommand("lintest", "Linear network against the nonstandard matvec");
  c_lin->add_option("--n", lin.n)->capture_default_str();
  c_lin->add_option("--p", lin.p)->capture_default_str();
  c_lin->add_option("--nb", lin.nb)->capture_default_str();
  c_lin->add_option("--dim", lin.dim)->check(CLI::IsMember({1, 2}))->capture_default_str();
  c_lin->add_option("--l0", lin.l0);
  c_lin->add_option("--trials", lin.trials)->capture_default_str();
  c_lin->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!seed_given) seed = default_seed();
    compress.seed = vec.seed = gen.seed = tr.seed = lin.seed = seed;
    if (*c_filters) return run_filters(filters);
    if (*c_compress) return run_compress(compress);
    if (*c_apply) return run_apply(apply);
    if (*c_bench) return run_bench(bench);
    if (*c_decay) return run_decay(decay);
    if (*c_kernel) return run_kernel(kernel);
    if (*c_vector) return run_vector(vec);
    if (*c_gen) return run_gen(gen);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev);
    if (*c_lin) return run_lintest(lin);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
