// Command-line front end: one subcommand per experiment, shared flags.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nikolskii/nikolskii.hpp"

namespace nk = nikolskii;

namespace {

struct Flags {
  std::string manifold = "t1";
  std::optional<double> n;
  std::vector<double> ns;
  std::optional<std::string> p;
  std::optional<std::string> q;
  std::optional<std::size_t> trials;
  std::uint64_t seed = 20240901;
  std::string out;
  std::string format = "csv";
  double oversample = 16.0;
  std::optional<double> s;
  std::optional<double> r;
  std::vector<double> distance;
  std::optional<double> eps;
  std::optional<double> thin;
  double delta0 = nk::kDefaultDelta0;
  std::string pairs;
  std::string worst_pairs;
  std::size_t points = 100;
  unsigned workers = 0;
};

nk::SweepConfig make_config(const Flags& f) {
  nk::SweepConfig cfg;
  cfg.manifold = f.manifold;
  if (!f.ns.empty()) {
    cfg.ns = f.ns;
  } else if (f.n) {
    cfg.ns = {*f.n};
  }
  if (f.trials) cfg.trials = *f.trials;
  cfg.seed = f.seed;
  cfg.oversample = f.oversample;
  cfg.distances = f.distance;
  cfg.delta0 = f.delta0;
  cfg.workers = f.workers;
  if (!f.pairs.empty()) cfg.pairs = nk::parse_pairs(f.pairs);
  if (!f.worst_pairs.empty()) cfg.worst_pairs = nk::parse_pairs(f.worst_pairs);
  if (f.p || f.q) {
    const nk::ExponentPair pair{nk::Exponent::parse(f.p.value_or("2")), nk::Exponent::parse(f.q.value_or("inf"))};
    cfg.pairs = {pair};
    cfg.worst_pairs = {pair};
  }
  if (f.q) cfg.moment_q = nk::Exponent::parse(*f.q);
  if (f.s) cfg.s_power = *f.s;
  if (f.r) cfg.r_power = *f.r;
  return cfg;
}

nk::Report run_pointset(const Flags& f, nk::SweepConfig cfg) {
  cfg.finalize();
  const auto m = nk::Manifold::from_name(cfg.manifold);
  const double n = f.n.value_or(cfg.ns.front());
  const double eps = f.eps.value_or(cfg.delta0 / std::max(n, 1.0));
  auto set = nk::greedy_maximal_separated(m, eps, cfg.seed);
  if (f.thin) set = nk::thin_subset(set, *f.thin);
  const auto space = nk::build_space(m, n);
  std::vector<double> weights;
  std::string weight_note = "nearest-centre MZ weights";
  try {
    weights = nk::mz_weights(set, space, cfg.delta0).weights;
  } catch (const nk::PreconditionError& e) {
    // Too coarse for MZ weights at this degree: export uniform weights.
    weight_note = std::string("uniform weights (") + e.what() + ")";
  }
  std::ostringstream csv;
  nk::write_points_csv(csv, set, weights);

  nk::Report rep;
  rep.kind = "pointset";
  rep.config = cfg;
  rep.tables.emplace_back("pointset", nk::parse_csv(csv.str()));
  const double sep = nk::min_pairwise_distance(m, set.points, set.separation);
  rep.notes = {{"points", set.size()},
               {"separation", set.separation},
               {"min_pairwise_distance", sep},
               {"covering_radius_audited", set.covering_radius},
               {"covering_radius_bound", set.covering_radius_bound},
               {"audit_resolution", set.audit_resolution},
               {"weights", weight_note}};
  rep.verdicts.push_back({"separation", sep >= set.separation - nk::kDistanceTolerance,
                          "min pairwise distance " + nk::format_number(sep) + " >= " +
                              nk::format_number(set.separation)});
  rep.verdicts.push_back({"covering", set.covering_radius <= set.covering_radius_bound + nk::kDistanceTolerance,
                          "audited covering radius " + nk::format_number(set.covering_radius) + " <= bound " +
                              nk::format_number(set.covering_radius_bound)});
  if (!weights.empty()) {
    double sum = 0.0;
    bool positive = true;
    for (double w : weights) {
      sum += w;
      positive = positive && w > 0.0;
    }
    rep.verdicts.push_back({"weights", positive && std::abs(sum - 1.0) <= 1e-10,
                            "all positive, sum = " + nk::format_number(sum)});
  }
  return rep;
}

int finish(const nk::Report& rep, const Flags& f) {
  const auto format = nk::parse_format(f.format);
  if (!f.out.empty()) {
    for (const auto& path : nk::emit_report(rep, format, f.out)) std::cerr << "wrote " << path.string() << '\n';
    std::cout << nk::verdict_table(rep);
  } else {
    const auto& table = rep.tables.front().second;
    if (format == nk::OutputFormat::csv) {
      std::cout << nk::to_csv(table);
    } else {
      auto j = nk::report_json(rep);
      j["rows"] = nk::to_json(table);
      std::cout << j.dump(2) << '\n';
    }
    std::cerr << nk::verdict_table(rep);
  }
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average and worst-case Nikolskii factors of random diffusion polynomials"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file with the same keys as the flags");
  Flags f;
  app.add_option("--manifold", f.manifold, "t1, t2, t3 or s2")
      ->check(CLI::IsMember({"t1", "t2", "t3", "s2"}))
      ->capture_default_str();
  app.add_option("--n", f.n, "single degree");
  app.add_option("--ns", f.ns, "degree sweep, comma separated")->delimiter(',');
  app.add_option("--p", f.p, "exponent p (number or inf)");
  app.add_option("--q", f.q, "exponent q (number or inf)");
  app.add_option("--trials", f.trials, "Monte Carlo trials (default 2000)");
  app.add_option("--seed", f.seed, "master seed")->capture_default_str();
  app.add_option("--out", f.out, "output directory; stdout when omitted");
  app.add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--oversample", f.oversample, "grid nodes per wavelength for norms")->capture_default_str();
  app.add_option("--s", f.s, "moment power s >= 1");
  app.add_option("--r", f.r, "inverse sup-moment order r > 0");
  app.add_option("--distance", f.distance, "kernel distances, comma separated")->delimiter(',');
  app.add_option("--eps", f.eps, "separation for point sets (default delta0/n)");
  app.add_option("--thin", f.thin, "thin the point set to this separation");
  app.add_option("--delta0", f.delta0, "MZ separation constant")->capture_default_str();
  app.add_option("--pairs", f.pairs, "average-factor pairs, e.g. 1:2,2:inf");
  app.add_option("--worst-pairs", f.worst_pairs, "worst-factor pairs, e.g. 2:inf,1:4");
  app.add_option("--points", f.points, "random points per degree for christoffel")->capture_default_str();
  app.add_option("--workers", f.workers, "worker threads (0 = all cores)")->capture_default_str();

  auto* weyl = app.add_subcommand("weyl", "dimension N against n^d");
  auto* kernel = app.add_subcommand("kernel-asym", "kernel against its Bessel asymptotics");
  auto* christ = app.add_subcommand("christoffel", "Christoffel function scaling");
  auto* pointset = app.add_subcommand("pointset", "maximal separated set with MZ weights");
  auto* average = app.add_subcommand("average", "average Nikolskii factors");
  auto* worst = app.add_subcommand("worst", "worst-case Nikolskii factors");
  auto* moments = app.add_subcommand("moments", "norm moments and inverse sup moments");
  auto* smallball = app.add_subcommand("smallball", "small-ball probabilities of normalized evaluations");
  auto* suite = app.add_subcommand("suite", "average, duality, moments and worst factors in one run");
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every usage error is 2 like runtime errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = make_config(f);
    if (weyl->parsed()) return finish(nk::run_weyl(cfg), f);
    if (kernel->parsed()) return finish(nk::run_kernel_asym(cfg), f);
    if (christ->parsed()) return finish(nk::run_christoffel(cfg, f.points), f);
    if (pointset->parsed()) return finish(run_pointset(f, cfg), f);
    if (average->parsed()) return finish(nk::run_average_suite(cfg), f);
    if (worst->parsed()) return finish(nk::run_worst_suite(cfg), f);
    if (moments->parsed()) return finish(nk::run_moments(cfg, f.r.has_value()), f);
    if (smallball->parsed()) {
      if (cfg.ns.empty()) cfg.ns = {64.0};
      return finish(nk::run_smallball(cfg, f.eps), f);
    }
    if (suite->parsed()) return finish(nk::run_suite(cfg), f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
