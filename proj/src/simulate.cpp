#include "dynident/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "dynident/filtering.hpp"

namespace dynident {

namespace {

using Vec4 = Eigen::Matrix<double, 4, 1>;

struct LoopDynamics {
  const BaseParameters& chi;
  const PdGains& gains;
  const DriveChain& chain;
  GainSet which_gain;
  const ReferenceTrajectory& traj;
  const SmoothSignConfig& ssign;
  double det_floor;

  Vec4 operator()(double t, const Vec4& x) const {
    const Vec2 q = x.head<2>();
    const Vec2 qd = x.tail<2>();
    const ReferenceTrajectory::Sample ref = traj.at(t);
    const Vec2 v = pd_control(ref.q, q, qd, gains);
    const Vec2 tau = drive_torque(v, chain, which_gain);
    Vec4 dx;
    dx.head<2>() = qd;
    dx.tail<2>() = forward_dynamics(q, qd, tau, chi, ssign, det_floor);
    return dx;
  }
};

// Dormand-Prince 5(4) pair with the quartic continuous extension. The dense
// output lets the record grid be sampled independently of the step sequence.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  // 5th-order weights double as the a7 row (FSAL)
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600,
                          e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640,
                          e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
};

struct DenseStep {
  double t0, h;
  Vec4 r1, r2, r3, r4, r5;

  Vec4 eval(double t) const {
    const double theta = (t - t0) / h;
    const double om = 1.0 - theta;
    return r1 + theta * (r2 + om * (r3 + theta * (r4 + om * r5)));
  }
};

double error_norm(const Vec4& err, const Vec4& x0, const Vec4& x1,
                  double rel_tol, double abs_tol) {
  double acc = 0;
  for (int i = 0; i < 4; ++i) {
    const double scale =
        abs_tol + rel_tol * std::max(std::abs(x0[i]), std::abs(x1[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / 4.0);
}

} // namespace

SimRecord integrate_closed_loop(const BaseParameters& chi,
                                const PdGains& gains, const DriveChain& chain,
                                GainSet which_gain,
                                const ReferenceTrajectory& traj,
                                const SimConfig& cfg,
                                const SmoothSignConfig& ssign) {
  const double t_end = traj.duration();
  const Eigen::Index n = static_cast<Eigen::Index>(std::lround(t_end * cfg.fm));
  if (n < 1) {
    throw ConfigInvalid("trajectory duration too short for sampling rate");
  }

  SimRecord rec;
  rec.times.resize(n);
  rec.q.resize(n, 2);
  rec.qd.resize(n, 2);
  rec.qdd.resize(n, 2);
  rec.tau.resize(n, 2);
  rec.v.resize(n, 2);

  const LoopDynamics f{chi,   gains, chain,        which_gain,
                       traj,  ssign, cfg.det_floor};

  auto emit = [&](Eigen::Index k, double t, const Vec4& x) {
    const Vec2 q = x.head<2>();
    const Vec2 qd = x.tail<2>();
    const ReferenceTrajectory::Sample ref = traj.at(t);
    const Vec2 v = pd_control(ref.q, q, qd, gains);
    const Vec2 tau = drive_torque(v, chain, which_gain);
    rec.times[k] = t;
    rec.q.row(k) = q.transpose();
    rec.qd.row(k) = qd.transpose();
    rec.qdd.row(k) =
        forward_dynamics(q, qd, tau, chi, ssign, cfg.det_floor).transpose();
    rec.tau.row(k) = tau.transpose();
    rec.v.row(k) = v.transpose();
  };

  Vec4 x;
  x << cfg.q0, cfg.qd0;
  double t = 0;
  Vec4 k1 = f(t, x);
  emit(0, 0.0, x);
  Eigen::Index next_sample = 1;

  const double h_min = 1e-14 * std::max(1.0, t_end);
  const double h_max = 0.25;
  double h = std::min(1e-3, t_end);

  while (t < t_end && next_sample < n) {
    h = std::min({h, h_max, t_end - t});

    const Vec4 k2 = f(t + Dopri5::c2 * h, x + h * (1.0 / 5) * k1);
    const Vec4 k3 =
        f(t + Dopri5::c3 * h, x + h * ((3.0 / 40) * k1 + (9.0 / 40) * k2));
    const Vec4 k4 = f(t + Dopri5::c4 * h,
                      x + h * ((44.0 / 45) * k1 + (-56.0 / 15) * k2 +
                               (32.0 / 9) * k3));
    const Vec4 k5 =
        f(t + Dopri5::c5 * h,
          x + h * ((19372.0 / 6561) * k1 + (-25360.0 / 2187) * k2 +
                   (64448.0 / 6561) * k3 + (-212.0 / 729) * k4));
    const Vec4 k6 =
        f(t + h, x + h * ((9017.0 / 3168) * k1 + (-355.0 / 33) * k2 +
                          (46732.0 / 5247) * k3 + (49.0 / 176) * k4 +
                          (-5103.0 / 18656) * k5));
    const Vec4 x_new =
        x + h * (Dopri5::b1 * k1 + Dopri5::b3 * k3 + Dopri5::b4 * k4 +
                 Dopri5::b5 * k5 + Dopri5::b6 * k6);
    const Vec4 k7 = f(t + h, x_new);

    const Vec4 err = h * (Dopri5::e1 * k1 + Dopri5::e3 * k3 + Dopri5::e4 * k4 +
                          Dopri5::e5 * k5 + Dopri5::e6 * k6 + Dopri5::e7 * k7);
    if (!x_new.allFinite() || !err.allFinite()) {
      throw IntegrationFailure("non-finite state at t = " + std::to_string(t));
    }
    const double en = error_norm(err, x, x_new, cfg.rel_tol, cfg.abs_tol);

    if (en <= 1.0) {
      DenseStep dense;
      dense.t0 = t;
      dense.h = h;
      dense.r1 = x;
      dense.r2 = x_new - x;
      dense.r3 = h * k1 - dense.r2;
      dense.r4 = dense.r2 - h * k7 - dense.r3;
      dense.r5 = h * (Dopri5::d1 * k1 + Dopri5::d3 * k3 + Dopri5::d4 * k4 +
                      Dopri5::d5 * k5 + Dopri5::d6 * k6 + Dopri5::d7 * k7);

      const double t_new = t + h;
      while (next_sample < n) {
        const double ts = next_sample / cfg.fm;
        if (ts > t_new + 1e-12) break;
        emit(next_sample, ts, dense.eval(std::min(ts, t_new)));
        ++next_sample;
      }

      t = t_new;
      x = x_new;
      k1 = k7;
      const double grow =
          en > 0 ? 0.9 * std::pow(en, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
    }
    if (h < h_min) {
      throw IntegrationFailure("step size underflow at t = " +
                               std::to_string(t));
    }
  }
  if (next_sample < n) {
    throw IntegrationFailure("integration ended before the sample grid");
  }
  return rec;
}

SimRecord synthesize_measurements(const SimRecord& record,
                                  const NoiseConfig& noise,
                                  const DriveChain& chain) {
  SimRecord out;
  out.times = record.times;
  out.q = record.q;
  out.tau = record.tau;
  const Eigen::Index n = record.rows();

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw_series = [&](Eigen::Index len) {
    Eigen::VectorXd s(len);
    for (Eigen::Index i = 0; i < len; ++i) s[i] = gauss(rng);
    return s;
  };

  if (noise.position_sigma > 0) {
    for (int j = 0; j < 2; ++j) {
      out.q.col(j) += noise.position_sigma * draw_series(n);
    }
  }
  const double fm =
      n > 1 ? 1.0 / (record.times[1] - record.times[0]) : 1.0;
  for (int j = 0; j < 2; ++j) {
    if (!(noise.torque_sigma[j] > 0)) continue;
    Eigen::VectorXd w = draw_series(n);
    if (noise.torque_band_hz > 0 && noise.torque_band_hz < fm / 2) {
      FilterSpec band;
      band.cutoff_hz = noise.torque_band_hz;
      const double gain = zero_phase_noise_gain(
          fm, band, static_cast<int>(std::min<Eigen::Index>(n, 4096)));
      w = zero_phase_lowpass(w, fm, band) / std::sqrt(gain);
    }
    out.tau.col(j) += noise.torque_sigma[j] * w;
  }

  out.v.resize(n, 2);
  for (int j = 0; j < 2; ++j) {
    out.v.col(j) = out.tau.col(j) / chain.g_actual[j];
  }
  // measurements expose only q and v / tau
  out.qd.resize(0, 2);
  out.qdd.resize(0, 2);
  return out;
}

SimRecord trim_transient(const SimRecord& record, double omega_n_min) {
  if (!(omega_n_min > 0)) {
    throw ConfigInvalid("omega_n_min must be positive");
  }
  const double t_cut = 5.0 / omega_n_min;
  const double fm =
      record.rows() > 1 ? 1.0 / (record.times[1] - record.times[0]) : 1.0;
  // a transient shorter than one sample period drops nothing
  const Eigen::Index first =
      static_cast<Eigen::Index>(std::floor(t_cut * fm));
  if (first >= record.rows()) {
    throw RecordTooShort("record of duration " +
                         std::to_string(record.rows() > 0
                                            ? record.times[record.rows() - 1]
                                            : 0.0) +
                         " s has no samples past the " +
                         std::to_string(t_cut) + " s transient");
  }
  const Eigen::Index m = record.rows() - first;
  SimRecord out;
  out.times = record.times.segment(first, m);
  out.q = record.q.middleRows(first, m);
  out.tau = record.tau.middleRows(first, m);
  out.v = record.v.middleRows(first, m);
  if (record.has_kinematics()) {
    out.qd = record.qd.middleRows(first, m);
    out.qdd = record.qdd.middleRows(first, m);
  } else {
    out.qd.resize(0, 2);
    out.qdd.resize(0, 2);
  }
  return out;
}

SimRecord downsample_record(const SimRecord& record, int factor) {
  if (factor < 1) {
    throw ConfigInvalid("downsample factor must be >= 1");
  }
  const Eigen::Index m = (record.rows() + factor - 1) / factor;
  SimRecord out;
  out.times.resize(m);
  out.q.resize(m, 2);
  out.tau.resize(m, 2);
  out.v.resize(m, 2);
  const bool kin = record.has_kinematics();
  out.qd.resize(kin ? m : 0, 2);
  out.qdd.resize(kin ? m : 0, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index k = i * factor;
    out.times[i] = record.times[k];
    out.q.row(i) = record.q.row(k);
    out.tau.row(i) = record.tau.row(k);
    out.v.row(i) = record.v.row(k);
    if (kin) {
      out.qd.row(i) = record.qd.row(k);
      out.qdd.row(i) = record.qdd.row(k);
    }
  }
  return out;
}

void write_record_csv(const SimRecord& record, const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw ConfigInvalid("cannot open " + path + " for writing");
  }
  f << "time,q1,q2,qd1,qd2,qdd1,qdd2,tau1,tau2,v1,v2\n";
  const bool kin = record.has_kinematics();
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    f << buf;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < record.rows(); ++i) {
    put(record.times[i], ',');
    put(record.q(i, 0), ',');
    put(record.q(i, 1), ',');
    put(kin ? record.qd(i, 0) : nan, ',');
    put(kin ? record.qd(i, 1) : nan, ',');
    put(kin ? record.qdd(i, 0) : nan, ',');
    put(kin ? record.qdd(i, 1) : nan, ',');
    put(record.tau(i, 0), ',');
    put(record.tau(i, 1), ',');
    put(record.v(i, 0), ',');
    put(record.v(i, 1), '\n');
  }
}

SimRecord read_record_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw ConfigInvalid("cannot open " + path);
  }
  std::string line;
  if (!std::getline(f, line)) {
    throw ConfigInvalid(path + " is empty");
  }
  std::vector<std::array<double, 11>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::array<double, 11> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 11; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw ConfigInvalid(path + ": short row");
      }
      row[c] = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  SimRecord rec;
  rec.times.resize(n);
  rec.q.resize(n, 2);
  rec.qd.resize(n, 2);
  rec.qdd.resize(n, 2);
  rec.tau.resize(n, 2);
  rec.v.resize(n, 2);
  bool kin = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[i];
    rec.times[i] = r[0];
    rec.q(i, 0) = r[1];
    rec.q(i, 1) = r[2];
    rec.qd(i, 0) = r[3];
    rec.qd(i, 1) = r[4];
    rec.qdd(i, 0) = r[5];
    rec.qdd(i, 1) = r[6];
    rec.tau(i, 0) = r[7];
    rec.tau(i, 1) = r[8];
    rec.v(i, 0) = r[9];
    rec.v(i, 1) = r[10];
    kin = kin && std::isfinite(r[3]);
  }
  if (!kin) {
    rec.qd.resize(0, 2);
    rec.qdd.resize(0, 2);
  }
  return rec;
}

} // namespace dynident
