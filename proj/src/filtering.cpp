#include "dynident/filtering.hpp"

#include <cmath>
#include <numbers>

namespace dynident {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Bilinear-transform lowpass sections of a Butterworth prototype. Even orders
// map to order/2 biquads; odd orders get one extra first-order section,
// folded here into a degenerate biquad (b2 = a2 = 0).
std::vector<Biquad> butterworth_lowpass(double cutoff_hz, double fm,
                                        int order) {
  if (!(cutoff_hz > 0) || !(cutoff_hz < fm / 2.0)) {
    throw ConfigInvalid("lowpass cutoff must lie in (0, fm/2)");
  }
  if (order < 1) {
    throw ConfigInvalid("filter order must be >= 1");
  }
  const double wc = std::tan(std::numbers::pi * cutoff_hz / fm);
  std::vector<Biquad> sections;
  for (int k = 1; 2 * k <= order; ++k) {
    const double alpha =
        -2.0 * std::cos(std::numbers::pi * (2.0 * k + order - 1.0) /
                        (2.0 * order));
    const double d = 1.0 + alpha * wc + wc * wc;
    Biquad s;
    s.b0 = wc * wc / d;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (wc * wc - 1.0) / d;
    s.a2 = (1.0 - alpha * wc + wc * wc) / d;
    sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double d = 1.0 + wc;
    Biquad s;
    s.b0 = wc / d;
    s.b1 = s.b0;
    s.b2 = 0.0;
    s.a1 = (wc - 1.0) / d;
    s.a2 = 0.0;
    sections.push_back(s);
  }
  return sections;
}

// One causal pass, transposed direct form II. State starts at the constant
// steady state for x[0], which keeps startup transients small on top of the
// reflection padding.
void filter_in_place(Eigen::VectorXd& x, const std::vector<Biquad>& sections) {
  for (const Biquad& s : sections) {
    const double x0 = x[0];
    double s1 = x0 * (1.0 - s.b0);
    double s2 = x0 * (s.b2 - s.a2);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      const double yi = s.b0 * xi + s1;
      s1 = s.b1 * xi - s.a1 * yi + s2;
      s2 = s.b2 * xi - s.a2 * yi;
      x[i] = yi;
    }
  }
}

} // namespace

Eigen::VectorXd zero_phase_lowpass(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double fm, const FilterSpec& spec) {
  const Eigen::Index n = x.size();
  const Eigen::Index pad = 3 * spec.order;
  if (n <= pad) {
    throw SeriesTooShort("series of length " + std::to_string(n) +
                         " too short for order-" + std::to_string(spec.order) +
                         " zero-phase filter");
  }
  const std::vector<Biquad> sections =
      butterworth_lowpass(spec.cutoff_hz, fm, spec.order);

  // odd reflection about the end values removes the step seen by the filter
  Eigen::VectorXd buf(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) {
    buf[i] = 2.0 * x[0] - x[pad - i];
    buf[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  buf.segment(pad, n) = x;

  filter_in_place(buf, sections);
  if (spec.zero_phase) {
    buf.reverseInPlace();
    filter_in_place(buf, sections);
    buf.reverseInPlace();
  }
  return buf.segment(pad, n);
}

double zero_phase_noise_gain(double fm, const FilterSpec& spec,
                             int probe_len) {
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(probe_len);
  impulse[probe_len / 2] = 1.0;
  const Eigen::VectorXd h = zero_phase_lowpass(impulse, fm, spec);
  return h.squaredNorm();
}

Eigen::VectorXd central_difference(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double fm) {
  const Eigen::Index n = x.size();
  if (n < 3) {
    throw SeriesTooShort("central difference needs at least 3 samples");
  }
  Eigen::VectorXd d(n);
  d[0] = (x[1] - x[0]) * fm;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    d[i] = (x[i + 1] - x[i - 1]) * fm / 2.0;
  }
  d[n - 1] = (x[n - 1] - x[n - 2]) * fm;
  return d;
}

KinematicsEstimate estimate_kinematics(
    const Eigen::Ref<const Eigen::MatrixXd>& q_samples, double fm,
    const std::optional<FilterSpec>& spec) {
  KinematicsEstimate est;
  est.q.resize(q_samples.rows(), q_samples.cols());
  est.qd.resize(q_samples.rows(), q_samples.cols());
  est.qdd.resize(q_samples.rows(), q_samples.cols());
  for (Eigen::Index j = 0; j < q_samples.cols(); ++j) {
    Eigen::VectorXd qj = q_samples.col(j);
    if (spec) {
      qj = zero_phase_lowpass(qj, fm, *spec);
    }
    est.q.col(j) = qj;
    est.qd.col(j) = central_difference(qj, fm);
    est.qdd.col(j) = central_difference(est.qd.col(j), fm);
  }
  return est;
}

Eigen::VectorXd decimate_series(const Eigen::Ref<const Eigen::VectorXd>& x,
                                double fm, const DecimationSpec& spec) {
  if (spec.nd < 1) {
    throw ConfigInvalid("decimation factor must be >= 1");
  }
  FilterSpec lp;
  lp.cutoff_hz = spec.effective_cutoff(fm);
  const Eigen::VectorXd filtered = zero_phase_lowpass(x, fm, lp);
  return downsample(filtered, spec.nd);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> parallel_decimate(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& w, const BlockBounds& blocks,
    double fm, const DecimationSpec& spec) {
  if (y.size() != w.rows()) {
    throw DimensionMismatch("measurement vector and observation matrix row "
                            "counts differ");
  }
  std::vector<Eigen::VectorXd> y_parts;
  std::vector<Eigen::MatrixXd> w_parts;
  Eigen::Index out_rows = 0;
  for (const auto& [begin, end] : blocks) {
    if (begin < 0 || end > y.size() || begin >= end) {
      throw DimensionMismatch("invalid joint block bounds");
    }
    const Eigen::Index len = end - begin;
    Eigen::VectorXd yb = decimate_series(y.segment(begin, len), fm, spec);
    Eigen::MatrixXd wb(yb.size(), w.cols());
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      wb.col(c) = decimate_series(w.col(c).segment(begin, len), fm, spec);
    }
    out_rows += yb.size();
    y_parts.push_back(std::move(yb));
    w_parts.push_back(std::move(wb));
  }
  Eigen::VectorXd y_out(out_rows);
  Eigen::MatrixXd w_out(out_rows, w.cols());
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < y_parts.size(); ++b) {
    y_out.segment(at, y_parts[b].size()) = y_parts[b];
    w_out.middleRows(at, w_parts[b].rows()) = w_parts[b];
    at += y_parts[b].size();
  }
  return {std::move(y_out), std::move(w_out)};
}

Eigen::VectorXd downsample(const Eigen::Ref<const Eigen::VectorXd>& x,
                           int factor) {
  if (factor < 1) {
    throw ConfigInvalid("downsample factor must be >= 1");
  }
  const Eigen::Index n = (x.size() + factor - 1) / factor;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = x[i * factor];
  }
  return out;
}

} // namespace dynident
