// Command-line driver: run, converge, validate, mesh-report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpsmag/checks.hpp"
#include "tpsmag/config.hpp"
#include "tpsmag/harness.hpp"

namespace {

using namespace tpsmag;

const char* preset_text(const std::string& name) {
  if (name == "llg-relax")
    return "# relaxation under a constant applied field, anisotropy easy axis (0,0,1)\n"
           "[mesh]\nlo = 0 0 0\nhi = 1 1 1\nn = 3\n"
           "[scheme]\nalpha = 1\nlex2 = 1\nk = 5e-3\nT = 1\nvariant = tps2\nstrategy = ab\n"
           "[pi]\ntype = uniaxial\ncoeff = 1\naxis = 0 0 1\n"
           "[applied]\ntype = constant\nvalue = -2 -0.5 0\n"
           "[init]\nm = smooth\n"
           "[output]\nevery = 10\n";
  if (name == "ellg-ramp")
    return "# conductor (0,1)^3 with centered ferromagnet of side 0.25, ramped field\n"
           "# desk-scale: n = 8, T = 1.75 with the ramp schedule compressed by 4\n"
           "[mesh]\nlo = 0 0 0\nhi = 1 1 1\nn = 8\ninner_lo = 0.375 0.375 0.375\n"
           "inner_hi = 0.625 0.625 0.625\n"
           "[scheme]\nalpha = 1\nlex2 = 1\nk = 3.5e-3\nT = 0.175\nvariant = tps2\nstrategy = ab\n"
           "[ellg]\nenabled = true\nmu0 = 1\nsigma.inner = 100\nsigma.outer = 1\ncoupling = dc2\n"
           "[applied]\ntype = ramp\ntime_scale = 0.25\n"
           "[init]\nm = uniform\nm_value = -1 -1 -1\nh = minus_m_inside\n"
           "[output]\nevery = 10\n";
  return nullptr;
}

FlatConfig gather_config(const std::string& config_path, const std::string& preset,
                         const std::vector<std::string>& sets) {
  FlatConfig flat;
  if (!config_path.empty()) {
    flat = load_config_file(config_path);
  } else if (!preset.empty()) {
    const char* text = preset_text(preset);
    if (!text) throw ConfigError("unknown preset '" + preset + "'");
    flat = parse_config_text(text);
  }
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    flat[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return flat;
}

int cmd_validate() {
  int failures = 0;
  auto line = [&failures](const char* name, bool ok) {
    std::printf("%-46s %s\n", name, ok ? "PASS" : "FAIL");
    if (!ok) failures += 1;
  };
  const WeightBoundReport wb = weight_bound_suite(100000);
  line("weight bound |W - alpha| <= Mk/2", wb.violations_i == 0);
  line("weight Taylor bound B^2 k^2 / (2 alpha)", wb.violations_ii == 0);
  line("theta row sums equal 1 (all schedules)", theta_rows_sum_to_one());
  line("eddy ledger flags corrupted h (neg. control)", ledger_negative_control());
  return failures == 0 ? 0 : 1;
}

int cmd_mesh_report(const FlatConfig& flat) {
  ConfigReader r(flat);
  const Vec3 lo = r.vec3("mesh.lo", {0, 0, 0});
  const Vec3 hi = r.vec3("mesh.hi", {1, 1, 1});
  const int n = r.integer("mesh.n", 2);
  const TetMesh mesh = build_cube_mesh(lo, hi, n);
  const MeshQuality q = mesh_quality(mesh);
  const AcutenessReport ac = weak_acuteness_report(mesh);
  std::printf("vertices        %d\n", mesh.n_vertices());
  std::printf("tets            %d\n", mesh.n_tets());
  std::printf("edges           %d\n", mesh.n_edges());
  std::printf("boundary faces  %zu\n", mesh.boundary_faces.size());
  std::printf("total volume    %.12g\n", mesh.total_volume());
  std::printf("h (max diam)    %.6g\n", q.h_max);
  std::printf("kappa ratio     %.6g (max diam/|K|^(1/3)), uniformity %.6g\n",
              q.max_diam_over_vol13, q.uniformity_ratio);
  std::printf("max dihedral    %.6f rad\n", ac.global_max);
  std::printf("weakly acute    %s\n", ac.weakly_acute ? "yes" : "no");
  return 0;
}

int cmd_converge(const std::string& preset, const std::vector<std::string>& sets,
                 const std::string& out_dir, int threads) {
  FlatConfig over;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    over[s.substr(0, eq)] = s.substr(eq + 1);
  }
  ConfigReader r(over);

  ConvergenceStudy study;
  if (preset == "llg-rates" || preset == "rho-study") {
    LlgRatesParams p;
    p.n = r.integer("study.n", p.n);
    p.T = r.num("study.T", p.T);
    p.n_ref = r.integer("study.n_ref", p.n_ref);
    p.levels = r.integer("study.levels", p.levels);
    p.anis_coeff = r.num("study.anis_coeff", p.anis_coeff);
    r.reject_unknown();
    study = preset == "llg-rates"
                ? converge_llg_rates(p, threads, &std::cerr)
                : converge_rho_study(p, {0.0, 0.5, 1.0}, threads, &std::cerr);
  } else if (preset == "ellg-rates") {
    EllgRatesParams p;
    p.n = r.integer("study.n", p.n);
    p.T = r.num("study.T", p.T);
    p.n_ref = r.integer("study.n_ref", p.n_ref);
    p.levels = r.integer("study.levels", p.levels);
    r.reject_unknown();
    study = converge_ellg_rates(p, threads, &std::cerr);
  } else {
    std::fprintf(stderr, "unknown preset '%s' (llg-rates | rho-study | ellg-rates)\n",
                 preset.c_str());
    return 2;
  }

  print_study(study, std::cout);
  std::filesystem::create_directories(out_dir);
  const std::string csv = (std::filesystem::path(out_dir) / (study.preset + ".csv")).string();
  write_study_csv(study, csv);
  std::cout << "\nwrote " << csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tangent plane scheme micromagnetics"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir = "out";
  std::vector<std::string> sets;
  int threads = 1;

  auto* run = app.add_subcommand("run", "time integration from a config file");
  run->add_option("--config", config_path, "config file (.ini-style or .json)");
  run->add_option("--preset", preset, "built-in run preset (llg-relax | ellg-ramp)");
  run->add_option("--set", sets, "override config keys, key=value");
  run->add_option("--out", out_dir, "output directory");

  std::string cv_preset;
  auto* converge = app.add_subcommand("converge", "temporal convergence study");
  converge->add_option("--preset", cv_preset, "llg-rates | rho-study | ellg-rates")->required();
  converge->add_option("--set", sets, "override study knobs, e.g. study.n_ref=640");
  converge->add_option("--out", out_dir, "output directory");
  converge->add_option("--threads", threads, "concurrent (k, strategy) cells");

  auto* validate = app.add_subcommand("validate", "weight bounds, theta identities, ledger checks");
  (void)validate;

  auto* mesh_report = app.add_subcommand("mesh-report", "mesh counts, quality, acuteness");
  mesh_report->add_option("--config", config_path, "config file with a [mesh] section");
  mesh_report->add_option("--set", sets, "override config keys, key=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) return cmd_validate();
    if (app.got_subcommand("mesh-report")) return cmd_mesh_report(gather_config(config_path, "", sets));
    if (app.got_subcommand("converge")) return cmd_converge(cv_preset, sets, out_dir, threads);
    if (app.got_subcommand("run")) {
      if (config_path.empty() && preset.empty()) {
        std::fprintf(stderr, "run: need --config or --preset\n");
        return 2;
      }
      FlatConfig flat = gather_config(config_path, preset, sets);
      if (!out_dir.empty()) flat["output.dir"] = out_dir;
      const RunConfig cfg = build_run_config(flat);
      return run_from_config(cfg, std::cerr);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
