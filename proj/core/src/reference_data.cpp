#include "diqkd/reference_data.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "diqkd/errors.hpp"

namespace diqkd::reference {
namespace {

using Counts = std::array<std::array<std::int64_t, 4>, kSettings>;
using Rows = std::array<OutcomeDist, kSettings>;

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

FiberRun make_run(int fiber_m, double u, const Counts& c, const Rows& rows, double p,
                  double p_n, double rate, double lambda, double delta) {
  FiberRun run;
  run.fiber_m = fiber_m;
  run.mean_photon = u;
  run.counts.counts = c;
  run.estimated = rows;
  run.params = {p, p_n};
  run.rate = rate;
  run.lambda = lambda;
  run.delta = delta;
  return run;
}

const std::array<FiberRun, 3>& runs() {
  static const std::array<FiberRun, 3> data{
      make_run(20, 0.040,
               {{{821569, 210284, 403056, 238565091},
                 {811822, 225388, 1164958, 237797832},
                 {893611, 160633, 162648, 238783108},
                 {1018112, 2390061, 222941, 236368886},
                 {61657, 3385904, 1973697, 234578742},
                 {542552, 2882175, 516659, 236058614}}},
               {{{0.0034595861375, 0.0008783402625, 0.0016772430375, 0.9939848305625},
                 {0.0034517152875, 0.0008862111125, 0.0049068972375, 0.9907551763625},
                 {0.0036990757000, 0.0006388507000, 0.0007081534400, 0.9949539201500},
                 {0.0042638694458, 0.0100145486208, 0.0008729597292, 0.9848486222042},
                 {0.0001526798958, 0.0141257381708, 0.0082059326292, 0.9775156493042},
                 {0.0022619194333, 0.0120164986333, 0.0021453097167, 0.9835762722167}}},
               0.96, 0.13, 2.33e-4, 3.15, 0.0015),
      make_run(80, 0.035,
               {{{708582, 182413, 350531, 238758474},
                 {682760, 190177, 998486, 238128577},
                 {749994, 136010, 142160, 238971836},
                 {868747, 2020739, 197393, 236913121},
                 {48278, 2863370, 1674701, 235413651},
                 {460499, 2442392, 441918, 236655191}}},
               {{{0.0029437385417, 0.0007367281267, 0.0014838718733, 0.9948356614583},
                 {0.0029099197904, 0.0007705468779, 0.0041822156221, 0.9921373177096},
                 {0.0031300572942, 0.0005504093742, 0.0006086322908, 0.9957109010408},
                 {0.0036371586825, 0.0084517649275, 0.0007904517325, 0.9871206246575},
                 {0.0001362149287, 0.0119527086813, 0.0069559204838, 0.9809551559062},
                 {0.0019048274300, 0.0101840961800, 0.0018338621550, 0.9860772142350}}},
               0.94, 0.17, 5.37e-5, 2.36, 0.0011),
      make_run(220, 0.040,
               {{{824762, 221542, 422523, 238531173},
                 {820512, 236435, 1191525, 237751528},
                 {858405, 164710, 168059, 238808826},
                 {1005157, 2373297, 231282, 236390264},
                 {58198, 3299222, 1924194, 234718386},
                 {536164, 2869523, 517035, 236077278}}},
               {{{0.0034164979150, 0.0009256770850, 0.0017579270850, 0.9938998979150},
                 {0.0033570343775, 0.0009851406225, 0.0049646927075, 0.9906931322925},
                 {0.0036441343750, 0.0006980406250, 0.0006884968750, 0.9949693281250},
                 {0.0042037569450, 0.0098817444450, 0.0009706680550, 0.9849438305550},
                 {0.0003214975725, 0.0137640038175, 0.0080002295125, 0.9779142690975},
                 {0.0021537371550, 0.0119317642350, 0.0021788940950, 0.9837356045150}}},
               0.99, 0.49, 1.30e-6, 6.66e-2, 3.20e-5),
  };
  return data;
}

}  // namespace

std::span<const FiberRun> fiber_runs() { return runs(); }

const FiberRun& fiber_run(int fiber_m) {
  for (const auto& r : runs()) {
    if (r.fiber_m == fiber_m) return r;
  }
  throw ConfigError("no reference data for fiber length " + std::to_string(fiber_m) + " m");
}

Behavior estimated_behavior(const FiberRun& run) {
  // The reference rows are rounded to 1e-13; renormalize before validation.
  Rows rows = run.estimated;
  for (auto& d : rows) {
    const double s = d[0] + d[1] + d[2] + d[3];
    for (double& v : d) v /= s;
  }
  return Behavior::from_settings(rows);
}

SpdcParams model_20m() {
  SpdcParams p;
  p.r = std::tan(deg(20.0));
  p.visibility = fidelity_to_visibility(kFidelity);
  p.eta_a = kEtaA;
  p.eta_b = kEtaB;
  p.dark_count = kDarkCount;
  p.mean_photon = 0.040;
  p.angles_a = {deg(-174.25671558), deg(103.31907649)};
  p.angles_b = {deg(20.97360779), deg(-46.78818894), deg(-1.37123296)};
  p.max_pairs = 3;
  return p;
}

SpdcParams chsh_model() {
  // Bloch angles are twice the half-wave-plate angles.
  SpdcParams p;
  p.r = std::tan(deg(32.2));
  p.visibility = fidelity_to_visibility(kFidelity);
  p.eta_a = kEtaA;
  p.eta_b = kEtaB;
  p.dark_count = kDarkCount;
  p.mean_photon = 0.62;
  p.angles_a = {deg(2 * -81.09), deg(2 * 61.46)};
  p.angles_b = {deg(2 * 8.18), deg(2 * -29.37), 0.0};
  p.max_pairs = 8;
  return p;
}

SpdcParams realistic_model(double eta) {
  SpdcParams p = model_20m();
  p.eta_a = eta;
  p.eta_b = eta;
  return p;
}

}  // namespace diqkd::reference
