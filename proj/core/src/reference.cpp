#include "angle_i2p/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Geometry>

namespace angle_i2p::reference {
namespace {

double sq(double x) { return x * x; }

}  // namespace

Matrix consistency_matrix(const CorrespondenceSet& corrs, std::span<const Index> group,
                          const ConsistencyOptions& options) {
  const std::size_t n = corrs.size();
  double oc[3] = {0, 0, 0};
  double pc[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      oc[a] += corrs.items[i].est_point(a);
      pc[a] += corrs.items[i].point(a);
    }
  }
  for (int a = 0; a < 3; ++a) {
    oc[a] /= static_cast<double>(n);
    pc[a] /= static_cast<double>(n);
  }
  const std::size_t k = group.size();
  Matrix out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (r == c) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
        continue;
      }
      const auto& a = corrs.items[group[r]];
      const auto& b = corrs.items[group[c]];
      double value = 0.0;
      if (options.mode == ConsistencyMode::kAngle) {
        double oa[3], ob[3], pa[3], pb[3];
        for (int m = 0; m < 3; ++m) {
          oa[m] = a.est_point(m) - oc[m];
          ob[m] = b.est_point(m) - oc[m];
          pa[m] = a.point(m) - pc[m];
          pb[m] = b.point(m) - pc[m];
        }
        const double noa = std::sqrt(oa[0] * oa[0] + oa[1] * oa[1] + oa[2] * oa[2]);
        const double nob = std::sqrt(ob[0] * ob[0] + ob[1] * ob[1] + ob[2] * ob[2]);
        const double npa = std::sqrt(pa[0] * pa[0] + pa[1] * pa[1] + pa[2] * pa[2]);
        const double npb = std::sqrt(pb[0] * pb[0] + pb[1] * pb[1] + pb[2] * pb[2]);
        if (noa > kDegenerateNorm && nob > kDegenerateNorm && npa > kDegenerateNorm &&
            npb > kDegenerateNorm) {
          double co = (oa[0] * ob[0] + oa[1] * ob[1] + oa[2] * ob[2]) / (noa * nob);
          double cp = (pa[0] * pb[0] + pa[1] * pb[1] + pa[2] * pb[2]) / (npa * npb);
          if (!options.signed_cosine) {
            co = std::fabs(co);
            cp = std::fabs(cp);
          }
          const double delta = std::fabs(co - cp);
          value = std::max(0.0, 1.0 - delta * delta / (options.sigma_d * options.sigma_d));
        }
      } else {
        double deo[3], dep[3];
        for (int m = 0; m < 3; ++m) {
          deo[m] = a.est_point(m) - b.est_point(m);
          dep[m] = a.point(m) - b.point(m);
        }
        const double lo = std::sqrt(deo[0] * deo[0] + deo[1] * deo[1] + deo[2] * deo[2]);
        const double lp = std::sqrt(dep[0] * dep[0] + dep[1] * dep[1] + dep[2] * dep[2]);
        const double diff = lo - lp;
        value = std::max(0.0, 1.0 - diff * diff / (options.sigma_dist * options.sigma_dist));
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = value;
    }
  }
  return out;
}

std::vector<std::vector<Index>> knn(std::span<const Point3> queries,
                                    std::span<const Point3> candidates, std::size_t k) {
  std::vector<std::vector<Index>> out;
  for (const auto& q : queries) {
    std::vector<std::pair<double, Index>> all;
    for (Index i = 0; i < candidates.size(); ++i) {
      const double d = sq(q.x() - candidates[i].x()) + sq(q.y() - candidates[i].y()) +
                       sq(q.z() - candidates[i].z());
      all.emplace_back(d, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<Index> group;
    for (std::size_t m = 0; m < k; ++m) group.push_back(all[m].second);
    out.push_back(std::move(group));
  }
  return out;
}

std::vector<Index> farthest_point_sampling(std::span<const Point3> points, std::size_t count,
                                           Index start) {
  std::vector<Index> selected;
  if (count == 0) return selected;
  selected.push_back(start);
  while (selected.size() < count) {
    Index best = points.size();
    double best_d = -1.0;
    for (Index i = 0; i < points.size(); ++i) {
      if (std::find(selected.begin(), selected.end(), i) != selected.end()) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (Index s : selected) {
        const double d = sq(points[i].x() - points[s].x()) + sq(points[i].y() - points[s].y()) +
                         sq(points[i].z() - points[s].z());
        nearest = std::min(nearest, d);
      }
      if (nearest > best_d) {
        best_d = nearest;
        best = i;
      }
    }
    selected.push_back(best);
  }
  return selected;
}

Index centroid_nearest(std::span<const Point3> points) {
  double c[3] = {0, 0, 0};
  for (const auto& p : points)
    for (int a = 0; a < 3; ++a) c[a] += p(a);
  for (double& v : c) v /= static_cast<double>(points.size());
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < points.size(); ++i) {
    const double d = sq(points[i].x() - c[0]) + sq(points[i].y() - c[1]) + sq(points[i].z() - c[2]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

namespace {

net::Tensor linear_loop(const net::Tensor& x, const net::Linear& lin) {
  net::Tensor y(x.rows(), lin.weight.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index o = 0; o < lin.weight.rows(); ++o) {
      double acc = lin.bias(0, o);
      for (Eigen::Index i = 0; i < x.cols(); ++i) acc += x(r, i) * lin.weight(o, i);
      y(r, o) = acc;
    }
  }
  return y;
}

}  // namespace

net::Tensor attention(const net::Tensor& fq, const net::Tensor& fkv, const net::Tensor* theta,
                      const net::AttentionLayer& layer, int heads) {
  const net::Tensor q = linear_loop(fq, layer.query);
  const net::Tensor k = linear_loop(fkv, layer.key);
  const net::Tensor v = linear_loop(fkv, layer.value);
  const Eigen::Index d = q.cols();
  const Eigen::Index dh = d / heads;
  net::Tensor concat = net::Tensor::Zero(fq.rows(), d);
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < fq.rows(); ++i) {
      std::vector<double> logits(static_cast<std::size_t>(fkv.rows()));
      double max = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < fkv.rows(); ++j) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
        s /= std::sqrt(static_cast<double>(dh));
        if (theta) s *= (*theta)(i, j);
        logits[static_cast<std::size_t>(j)] = s;
        max = std::max(max, s);
      }
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - max);
        z += l;
      }
      for (Eigen::Index j = 0; j < fkv.rows(); ++j) {
        const double a = logits[static_cast<std::size_t>(j)] / z;
        for (Eigen::Index c = 0; c < dh; ++c) concat(i, h * dh + c) += a * v(j, h * dh + c);
      }
    }
  }
  return linear_loop(concat, layer.output);
}

net::Tensor embed(const net::Tensor& features, const net::Model& model) {
  net::Tensor hidden = linear_loop(features, model.embed_in);
  for (Eigen::Index r = 0; r < hidden.rows(); ++r)
    for (Eigen::Index c = 0; c < hidden.cols(); ++c) hidden(r, c) = std::tanh(hidden(r, c));
  return linear_loop(hidden, model.embed_out);
}

double quaternion_rotation_error(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt) {
  const Eigen::Quaterniond qe = Eigen::Quaterniond(r_est).normalized();
  const Eigen::Quaterniond qg = Eigen::Quaterniond(r_gt).normalized();
  // 2*acos loses precision near identity; atan2 of the vector part does not.
  const Eigen::Quaterniond rel = qe.conjugate() * qg;
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::fabs(rel.w()));
  return angle * 180.0 / std::numbers::pi;
}

net::Model numeric_gradient(const net::Model& model,
                            const std::function<double(const net::Model&)>& loss, double step) {
  net::Model grad = model.zeros_like();
  net::Model probe = model;
  std::vector<net::Tensor*> probe_params;
  std::vector<net::Tensor*> grad_params;
  probe.for_each([&](const std::string&, net::Tensor& t) { probe_params.push_back(&t); });
  grad.for_each([&](const std::string&, net::Tensor& t) { grad_params.push_back(&t); });
  for (std::size_t p = 0; p < probe_params.size(); ++p) {
    auto& t = *probe_params[p];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double up = loss(probe);
      t.data()[i] = saved - step;
      const double down = loss(probe);
      t.data()[i] = saved;
      grad_params[p]->data()[i] = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

}  // namespace angle_i2p::reference
