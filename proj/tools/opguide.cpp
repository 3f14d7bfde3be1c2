// opguide: command-line front end for guided sample-consistent reconstruction.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "opguide/fixtures.hpp"
#include "opguide/guidance.hpp"
#include "opguide/io.hpp"
#include "opguide/metrics.hpp"
#include "opguide/reconstruct.hpp"
#include "opguide/sampling.hpp"
#include "opguide/validation.hpp"

namespace {

using namespace opguide;

enum ExitCode : int { kOk = 0, kFailure = 1, kMaxIter = 2, kBreakdown = 3 };

struct KernelFlags {
  std::string kind = "bilateral";
  KernelParams params;
  int poly_degree = 1;
  double sinkhorn_tol = 1e-8;
  std::size_t sinkhorn_iters = 100;

  void add_to(CLI::App& app) {
    app.add_option("--kernel", kind, "Guidance kernel")->check(CLI::IsMember({"bilateral", "tv"}))->capture_default_str();
    app.add_option("--radius", params.radius, "Bilateral window radius (pixels)")->capture_default_str();
    app.add_option("--sigma-spatial", params.sigma_spatial, "Bilateral spatial sigma (pixels)")->capture_default_str();
    app.add_option("--sigma-range", params.sigma_range, "Bilateral range sigma (intensity)")->capture_default_str();
    app.add_option("--epsilon", params.epsilon, "TV regularizer")->capture_default_str();
    app.add_option("--poly-degree", poly_degree, "Polynomial degree n of L = (I - W)^n")->capture_default_str();
    app.add_option("--sinkhorn-tol", sinkhorn_tol, "Sinkhorn row-sum tolerance")->capture_default_str();
    app.add_option("--sinkhorn-iters", sinkhorn_iters, "Sinkhorn iteration cap")->capture_default_str();
  }
  KernelParams resolved() const {
    KernelParams p = params;
    p.kind = parse_kernel(kind);
    return p;
  }
};

struct ReconstructFlags {
  KernelFlags kernel;
  std::string input, guide, output, cg_history, init = "bilinear", pre_mode = "hr";
  std::size_t factor = 4, offset = 0;
  std::size_t cg_iters = 20;
  double cg_tol = 1e-3;
  double rho_pre = 0.05, rho_post = 0.05;
  bool adjust_dc = false;
  int bit_depth = 8;

  void add_to(CLI::App& app, bool with_factor) {
    app.add_option("--input", input, "Low-resolution input image (.pgm/.ppm/.png)")->required()->check(CLI::ExistingFile);
    app.add_option("--output", output, "Output image")->required();
    if (with_factor) {
      app.add_option("--guide", guide, "High-resolution guidance image")->required()->check(CLI::ExistingFile);
      app.add_option("--factor", factor, "Decimation factor")->check(CLI::PositiveNumber)->capture_default_str();
      app.add_option("--offset", offset, "Decimation offset, 0 <= offset < factor")->capture_default_str();
      app.add_option("--init", init, "Initial guess")->check(CLI::IsMember({"zero", "nearest", "bilinear"}))->capture_default_str();
    } else {
      app.add_option("--guide", guide, "Guidance image (defaults to the input)")->check(CLI::ExistingFile);
    }
    kernel.add_to(app);
    app.add_option("--cg-iters", cg_iters, "CG iteration cap m")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--cg-tol", cg_tol, "CG relative residual tolerance")->capture_default_str();
    app.add_option("--cg-history", cg_history, "CSV file for iteration,relative_residual");
    app.add_option("--rho-pre", rho_pre, "Pre-smoothing strength")->capture_default_str();
    app.add_option("--rho-post", rho_post, "Post-smoothing strength")->capture_default_str();
    app.add_option("--pre-mode", pre_mode, "Pre-smoothing form")->check(CLI::IsMember({"hr", "lr-filter"}))->capture_default_str();
    app.add_flag("--adjust-dc", adjust_dc, "Match the mean of the output to the input");
    app.add_option("--bit-depth", bit_depth, "Output bit depth")->check(CLI::IsMember({8, 16}))->capture_default_str();
  }

  ReconstructionConfig config() const {
    ReconstructionConfig cfg;
    cfg.factor = factor;
    cfg.offset = offset;
    cfg.kernel = kernel.resolved();
    cfg.poly_degree = kernel.poly_degree;
    cfg.sinkhorn_tol = kernel.sinkhorn_tol;
    cfg.sinkhorn_iters = kernel.sinkhorn_iters;
    cfg.cg.max_iter = cg_iters;
    cfg.cg.rel_tol = cg_tol;
    cfg.cg.record_history = !cg_history.empty();
    cfg.rho_pre = rho_pre;
    cfg.rho_post = rho_post;
    cfg.pre_mode = parse_pre_mode(pre_mode);
    cfg.adjust_dc = adjust_dc;
    cfg.init = parse_init_mode(init);
    return cfg;
  }
};

void write_history(const std::string& path, const std::vector<CgReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "iteration,relative_residual\n";
  // Channels follow each other; the iteration counter restarts at 0 for each.
  for (const auto& rep : reports)
    for (std::size_t k = 0; k < rep.residual_history.size(); ++k) out << k << ',' << rep.residual_history[k] << '\n';
}

int run_reconstruction(const ReconstructFlags& f, bool denoise) {
  ReconstructionConfig cfg = f.config();
  if (denoise) {
    cfg.factor = 1;
    cfg.offset = 0;
  }
  const Image y = load_image(f.input);
  const Image g = f.guide.empty() ? y : load_image(f.guide);
  const ReconstructionResult res = reconstruct(y, cfg, g);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  save_image(res.image, f.output, f.bit_depth);
  if (!f.cg_history.empty()) write_history(f.cg_history, res.reports);

  int code = kOk;
  for (std::size_t ch = 0; ch < res.reports.size(); ++ch) {
    const CgReport& r = res.reports[ch];
    std::fprintf(stderr, "channel %zu: %zu CG iterations, relative residual %.3e, breakdown %s\n", ch,
                 r.iterations_used, r.final_rel_residual, to_string(r.breakdown));
    if (r.breakdown == Breakdown::indefinite) code = kBreakdown;
    else if (!r.converged && code == kOk) code = kMaxIter;
  }
  return code;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splices `key=value` lines from --config <file> in front of the explicit
// arguments as `--key=value`, skipping keys already given on the command line.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line without '=': " + line);
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 2, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) injected.push_back(flag + "=" + trim(line.substr(eq + 1)));
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator-guided sample-consistent image reconstruction"};
  std::string config_path;  // consumed by expand_config
  app.require_subcommand(1);

  ReconstructFlags up;
  CLI::App* upsample = app.add_subcommand("upsample", "Guided super-resolution of a decimated image");
  upsample->add_option("--config", config_path, "key=value file mirroring the flags; command-line flags take precedence");
  up.add_to(*upsample, true);

  ReconstructFlags dn;
  CLI::App* denoise = app.add_subcommand("denoise", "Guided smoothing at full resolution (factor 1)");
  denoise->add_option("--config", config_path, "key=value file mirroring the flags; command-line flags take precedence");
  dn.add_to(*denoise, false);

  std::string noise_in, noise_out;
  NoiseSpec noise;
  int noise_depth = 8;
  CLI::App* add_noise_cmd = app.add_subcommand("add-noise", "Add seeded zero-mean Gaussian noise");
  add_noise_cmd->add_option("--input", noise_in)->required()->check(CLI::ExistingFile);
  add_noise_cmd->add_option("--output", noise_out)->required();
  add_noise_cmd->add_option("--variance", noise.variance, "Noise variance")->capture_default_str();
  add_noise_cmd->add_option("--seed", noise.seed, "Generator seed")->capture_default_str();
  add_noise_cmd->add_option("--bit-depth", noise_depth)->check(CLI::IsMember({8, 16}))->capture_default_str();

  std::string ds_in, ds_out;
  std::size_t ds_factor = 4, ds_offset = 0;
  int ds_depth = 8;
  CLI::App* downsample_cmd = app.add_subcommand("downsample", "Keep every factor-th pixel in both dimensions");
  downsample_cmd->add_option("--input", ds_in)->required()->check(CLI::ExistingFile);
  downsample_cmd->add_option("--output", ds_out)->required();
  downsample_cmd->add_option("--factor", ds_factor)->check(CLI::PositiveNumber)->capture_default_str();
  downsample_cmd->add_option("--offset", ds_offset)->capture_default_str();
  downsample_cmd->add_option("--bit-depth", ds_depth)->check(CLI::IsMember({8, 16}))->capture_default_str();

  std::string psnr_in, psnr_ref;
  CLI::App* psnr_cmd = app.add_subcommand("psnr", "PSNR (peak 1.0) of an image against a reference");
  psnr_cmd->add_option("--input", psnr_in)->required()->check(CLI::ExistingFile);
  psnr_cmd->add_option("--reference", psnr_ref)->required()->check(CLI::ExistingFile);

  KernelFlags vk;
  vk.kind = "tv";
  std::size_t v_size = 8, v_factor = 2;
  std::uint64_t v_seed = 1;
  std::vector<double> v_rhos{1e-1, 1e-2, 1e-3, 1e-4};
  std::string v_out;
  CLI::App* validate = app.add_subcommand("validate", "Dense Tikhonov-limit check on a random fixture (CSV report)");
  validate->add_option("--config", config_path, "key=value file mirroring the flags; command-line flags take precedence");
  validate->add_option("--size", v_size, "Fixture side length")->check(CLI::Range(2, 64))->capture_default_str();
  validate->add_option("--factor", v_factor)->check(CLI::PositiveNumber)->capture_default_str();
  validate->add_option("--seed", v_seed)->capture_default_str();
  validate->add_option("--rho", v_rhos, "Regularization values to sweep")->delimiter(',')->capture_default_str();
  validate->add_option("--output", v_out, "CSV path (stdout when omitted)");
  vk.add_to(*validate);

  KernelFlags dk;
  std::string dw_guide, dw_out;
  bool dw_raw = false;
  CLI::App* dump = app.add_subcommand("dump-weights", "Write W(g) as sorted 'i j w' triplets");
  dump->add_option("--guide", dw_guide)->required()->check(CLI::ExistingFile);
  dump->add_option("--output", dw_out, "Output path (stdout when omitted)");
  dump->add_flag("--unbalanced", dw_raw, "Skip Sinkhorn balancing");
  dk.add_to(*dump);

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (upsample->parsed()) return run_reconstruction(up, false);
    if (denoise->parsed()) return run_reconstruction(dn, true);

    if (add_noise_cmd->parsed()) {
      save_image(add_noise(load_image(noise_in), noise), noise_out, noise_depth);
      return kOk;
    }

    if (downsample_cmd->parsed()) {
      const Image img = load_image(ds_in);
      save_image(downsample_image(SamplingOperator(img.width, img.height, ds_factor, ds_offset), img), ds_out, ds_depth);
      return kOk;
    }

    if (psnr_cmd->parsed()) {
      const MetricReport m = psnr(load_image(psnr_in), load_image(psnr_ref));
      std::printf("mse,psnr\n%.10g,", m.mse);
      if (m.exact()) std::printf("inf\n");
      else std::printf("%.6f\n", m.psnr);
      return kOk;
    }

    if (validate->parsed()) {
      const Image g = fixtures::random_guide(v_size, v_size, 1, v_seed);
      const SamplingOperator sampling(v_size, v_size, v_factor);
      const GuidanceBuild gb =
          build_guiding_operator(g, vk.resolved(), vk.poly_degree, vk.sinkhorn_tol, vk.sinkhorn_iters);
      const Signal y = fixtures::random_signal(sampling.lr_size(), v_seed + 1, 0.0, 1.0);
      const SchurReport rep = schur_limit_check(assemble_dense(gb.op, sampling, y), v_rhos);

      std::ofstream file;
      if (!v_out.empty()) {
        file.open(v_out);
        if (!file) throw std::runtime_error("cannot write " + v_out);
      }
      std::ostream& os = v_out.empty() ? std::cout : file;
      os.precision(10);
      os << "rho,error,defect,free_gap\n";
      for (const auto& r : rep.rows) os << r.rho << ',' << r.error << ',' << r.defect << ',' << r.free_gap << '\n';
      os << "slope_error," << rep.slope_error << '\n' << "slope_defect," << rep.slope_defect << '\n';
      return kOk;
    }

    if (dump->parsed()) {
      const Image g = load_image(dw_guide);
      GuidedWeights w = build_weights(g, dk.resolved());
      if (!dw_raw) w = sinkhorn_balance(std::move(w), dk.sinkhorn_tol, dk.sinkhorn_iters).weights;
      if (dw_out.empty()) {
        write_weight_triplets(std::cout, w);
      } else {
        std::ofstream out(dw_out);
        if (!out) throw std::runtime_error("cannot write " + dw_out);
        write_weight_triplets(out, w);
      }
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
