#include "smith/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace smith {

namespace {

Tape& same_tape(Tensor a, Tensor b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("tensors live on different tapes");
  return *a.tape();
}

void require_same_shape(Tensor a, Tensor b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Tensor add(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "add");
  const int ai = a.id(), bi = b.id();
  return t.emplace(a.value() + b.value(), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad) t.grad_buffer(ai) += g;
    if (t.node(bi).requires_grad) t.grad_buffer(bi) += g;
  });
}

Tensor sub(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "sub");
  const int ai = a.id(), bi = b.id();
  return t.emplace(a.value() - b.value(), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad) t.grad_buffer(ai) += g;
    if (t.node(bi).requires_grad) t.grad_buffer(bi) -= g;
  });
}

Tensor mul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "mul");
  const int ai = a.id(), bi = b.id();
  return t.emplace(a.value().cwiseProduct(b.value()), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad)
      t.grad_buffer(ai) += g.cwiseProduct(t.node(bi).value);
    if (t.node(bi).requires_grad)
      t.grad_buffer(bi) += g.cwiseProduct(t.node(ai).value);
  });
}

Tensor scale(Tensor a, double s) {
  Tape& t = *a.tape();
  const int ai = a.id();
  return t.emplace(a.value() * s, {ai}, [ai, s](Tape& t, int self) {
    t.grad_buffer(ai) += t.node(self).grad * s;
  });
}

Tensor scale_by(Tensor a, Tensor s) {
  Tape& t = same_tape(a, s);
  if (s.rows() != 1 || s.cols() != 1)
    throw std::invalid_argument("scale_by: factor must be 1x1");
  const int ai = a.id(), si = s.id();
  return t.emplace(a.value() * s.value()(0, 0), {ai, si}, [ai, si](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad) t.grad_buffer(ai) += g * t.node(si).value(0, 0);
    if (t.node(si).requires_grad)
      t.grad_buffer(si)(0, 0) += g.cwiseProduct(t.node(ai).value).sum();
  });
}

Tensor matmul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                ")");
  const int ai = a.id(), bi = b.id();
  return t.emplace(a.value() * b.value(), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad) t.grad_buffer(ai) += g * t.node(bi).value.transpose();
    if (t.node(bi).requires_grad) t.grad_buffer(bi) += t.node(ai).value.transpose() * g;
  });
}

Tensor matmul_nt(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: feature dimensions disagree (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) +
                                ")");
  const int ai = a.id(), bi = b.id();
  return t.emplace(a.value() * b.value().transpose(), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(ai).requires_grad) t.grad_buffer(ai) += g * t.node(bi).value;
    if (t.node(bi).requires_grad) t.grad_buffer(bi) += g.transpose() * t.node(ai).value;
  });
}

Tensor transpose(Tensor a) {
  Tape& t = *a.tape();
  const int ai = a.id();
  return t.emplace(a.value().transpose(), {ai}, [ai](Tape& t, int self) {
    t.grad_buffer(ai) += t.node(self).grad.transpose();
  });
}

Tensor add_row_vector(Tensor x, Tensor v) {
  Tape& t = same_tape(x, v);
  if (v.rows() != 1 || v.cols() != x.cols())
    throw std::invalid_argument("add_row_vector: v must be 1 x cols(x)");
  const int xi = x.id(), vi = v.id();
  Mat out = x.value();
  out.rowwise() += v.value().row(0);
  return t.emplace(std::move(out), {xi, vi}, [xi, vi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.node(xi).requires_grad) t.grad_buffer(xi) += g;
    if (t.node(vi).requires_grad) t.grad_buffer(vi).row(0) += g.colwise().sum();
  });
}

Tensor affine(Tensor x, Tensor w, Tensor b) { return add_row_vector(matmul(x, w), b); }

Tensor softmax_rows(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  Mat y = x.value();
  Eigen::VectorXd mx = y.rowwise().maxCoeff();
  y.colwise() -= mx;
  y = y.array().exp().matrix();
  Eigen::VectorXd sums = y.rowwise().sum();
  y.array().colwise() /= sums.array();
  return t.emplace(std::move(y), {xi}, [xi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    const Mat& y = t.node(self).value;
    Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
    t.grad_buffer(xi).array() += y.array() * (g.array().colwise() - dot.array());
  });
}

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias) {
  Tape& t = same_tape(x, gain);
  same_tape(x, bias);
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
      bias.cols() != x.cols())
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  const int xi = x.id(), gi = gain.id(), bi = bias.id();
  const Mat& xv = x.value();
  Eigen::VectorXd mean = xv.rowwise().mean();
  Mat centered = xv.colwise() - mean;
  Eigen::VectorXd var = centered.array().square().rowwise().mean();
  Eigen::VectorXd inv_std = (var.array() + kLayerNormEps).rsqrt();
  Mat normalized = centered.array().colwise() * inv_std.array();
  Mat out = normalized.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  // Backward recomputes the normalized activations from cached statistics.
  return t.emplace(std::move(out), {xi, gi, bi},
                   [xi, gi, bi, centered = std::move(centered),
                    inv_std = std::move(inv_std)](Tape& t, int self) {
                     const Mat& g = t.node(self).grad;
                     Mat normalized = centered.array().colwise() * inv_std.array();
                     if (t.node(gi).requires_grad)
                       t.grad_buffer(gi).row(0) +=
                           (g.array() * normalized.array()).colwise().sum().matrix();
                     if (t.node(bi).requires_grad)
                       t.grad_buffer(bi).row(0) += g.colwise().sum();
                     if (t.node(xi).requires_grad) {
                       const auto gain_row = t.node(gi).value.row(0).array();
                       Mat gn = g.array().rowwise() * gain_row;
                       Eigen::VectorXd mean_gn = gn.rowwise().mean();
                       Eigen::VectorXd mean_gn_norm =
                           (gn.array() * normalized.array()).rowwise().mean();
                       Mat dx = (gn.colwise() - mean_gn).array() -
                                (normalized.array().colwise() * mean_gn_norm.array());
                       t.grad_buffer(xi).array() += dx.array().colwise() * inv_std.array();
                     }
                   });
}

Tensor gelu(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  const Mat& xv = x.value();
  Mat cdf = xv.unaryExpr([](double v) { return 0.5 * (1.0 + std::erf(v * kInvSqrt2)); });
  Mat out = xv.cwiseProduct(cdf);
  return t.emplace(std::move(out), {xi}, [xi, cdf = std::move(cdf)](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    const Mat& xv = t.node(xi).value;
    Mat pdf = (kInvSqrt2Pi * (-0.5 * xv.array().square()).exp()).matrix();
    t.grad_buffer(xi).array() +=
        g.array() * (cdf.array() + xv.array() * pdf.array());
  });
}

Tensor sigmoid(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  Mat y = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  return t.emplace(std::move(y), {xi}, [xi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    const Mat& y = t.node(self).value;
    t.grad_buffer(xi).array() += g.array() * y.array() * (1.0 - y.array());
  });
}

Tensor gather_rows(Tensor x, std::vector<int> row_ids) {
  Tape& t = *x.tape();
  const int xi = x.id();
  Mat out(static_cast<Eigen::Index>(row_ids.size()), x.cols());
  for (size_t i = 0; i < row_ids.size(); ++i) {
    if (row_ids[i] < 0 || row_ids[i] >= x.rows())
      throw std::out_of_range("gather_rows: row id " + std::to_string(row_ids[i]) +
                              " out of range [0, " + std::to_string(x.rows()) + ")");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(row_ids[i]);
  }
  return t.emplace(std::move(out), {xi},
                   [xi, ids = std::move(row_ids)](Tape& t, int self) {
                     const Mat& g = t.node(self).grad;
                     Mat& gx = t.grad_buffer(xi);
                     for (size_t i = 0; i < ids.size(); ++i)
                       gx.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
                   });
}

Tensor replace_rows(Tensor x, std::vector<int> row_ids, Tensor row) {
  Tape& t = same_tape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols())
    throw std::invalid_argument("replace_rows: row must be 1 x cols(x)");
  Mat out = x.value();
  for (size_t i = 0; i < row_ids.size(); ++i) {
    int r = row_ids[i];
    if (r < 0 || r >= x.rows()) throw std::out_of_range("replace_rows: row id out of range");
    for (size_t j = i + 1; j < row_ids.size(); ++j)
      if (row_ids[j] == r) throw std::invalid_argument("replace_rows: duplicate row id");
    out.row(r) = row.value().row(0);
  }
  const int xi = x.id(), ri = row.id();
  return t.emplace(std::move(out), {xi, ri},
                   [xi, ri, ids = std::move(row_ids)](Tape& t, int self) {
                     const Mat& g = t.node(self).grad;
                     if (t.node(xi).requires_grad) {
                       Mat masked = g;
                       for (int r : ids) masked.row(r).setZero();
                       t.grad_buffer(xi) += masked;
                     }
                     if (t.node(ri).requires_grad) {
                       Mat& gr = t.grad_buffer(ri);
                       for (int r : ids) gr.row(0) += g.row(r);
                     }
                   });
}

Tensor slice_cols(Tensor x, int start, int n) {
  if (start < 0 || n <= 0 || start + n > x.cols())
    throw std::out_of_range("slice_cols: range out of bounds");
  Tape& t = *x.tape();
  const int xi = x.id();
  return t.emplace(x.value().middleCols(start, n), {xi}, [xi, start, n](Tape& t, int self) {
    t.grad_buffer(xi).middleCols(start, n) += t.node(self).grad;
  });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
  Tape& t = *xs[0].tape();
  Eigen::Index rows = 0;
  const Eigen::Index cols = xs[0].cols();
  std::vector<int> parents;
  for (const Tensor& x : xs) {
    same_tape(xs[0], x);
    if (x.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += x.rows();
    parents.push_back(x.id());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Tensor& x : xs) {
    out.middleRows(at, x.rows()) = x.value();
    at += x.rows();
  }
  return t.emplace(std::move(out), parents, [parents](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    Eigen::Index at = 0;
    for (int p : parents) {
      Eigen::Index n = t.node(p).value.rows();
      if (t.node(p).requires_grad) t.grad_buffer(p) += g.middleRows(at, n);
      at += n;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  Tape& t = *xs[0].tape();
  Eigen::Index cols = 0;
  const Eigen::Index rows = xs[0].rows();
  std::vector<int> parents;
  for (const Tensor& x : xs) {
    same_tape(xs[0], x);
    if (x.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += x.cols();
    parents.push_back(x.id());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Tensor& x : xs) {
    out.middleCols(at, x.cols()) = x.value();
    at += x.cols();
  }
  return t.emplace(std::move(out), parents, [parents](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    Eigen::Index at = 0;
    for (int p : parents) {
      Eigen::Index n = t.node(p).value.cols();
      if (t.node(p).requires_grad) t.grad_buffer(p) += g.middleCols(at, n);
      at += n;
    }
  });
}

Tensor sum_rows(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  Mat out = x.value().colwise().sum();
  return t.emplace(std::move(out), {xi}, [xi](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.grad_buffer(xi).rowwise() += g.row(0);
  });
}

Tensor mean_rows(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  const double inv = 1.0 / static_cast<double>(x.rows());
  Mat out = x.value().colwise().sum() * inv;
  return t.emplace(std::move(out), {xi}, [xi, inv](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.grad_buffer(xi).rowwise() += g.row(0) * inv;
  });
}

Tensor sum_all(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  Mat out(1, 1);
  out(0, 0) = x.value().sum();
  return t.emplace(std::move(out), {xi}, [xi](Tape& t, int self) {
    t.grad_buffer(xi).array() += t.node(self).grad(0, 0);
  });
}

Tensor l2_normalize_rows(Tensor x) {
  Tape& t = *x.tape();
  const int xi = x.id();
  const Mat& xv = x.value();
  Eigen::VectorXd norms = xv.rowwise().norm();
  Eigen::VectorXd safe = norms.cwiseMax(kL2NormGuard);
  Mat out = xv.array().colwise() / safe.array();
  return t.emplace(std::move(out), {xi},
                   [xi, norms = std::move(norms), safe = std::move(safe)](Tape& t, int self) {
                     const Mat& g = t.node(self).grad;
                     const Mat& y = t.node(self).value;
                     Mat dx = g.array().colwise() / safe.array();
                     for (Eigen::Index r = 0; r < g.rows(); ++r) {
                       if (norms(r) < kL2NormGuard) continue;  // constant-scale branch
                       double along = y.row(r).dot(g.row(r));
                       dx.row(r) -= y.row(r) * (along / safe(r));
                     }
                     t.grad_buffer(xi) += dx;
                   });
}

Tensor dropout(Tensor x, const Dropout& ctx) {
  if (!ctx.on()) return x;
  if (ctx.rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  Tape& t = *x.tape();
  const int xi = x.id();
  std::bernoulli_distribution keep(1.0 - ctx.rate);
  const double inv_keep = 1.0 / (1.0 - ctx.rate);
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = keep(*ctx.rng) ? inv_keep : 0.0;
  Mat out = x.value().cwiseProduct(mask);
  return t.emplace(std::move(out), {xi}, [xi, mask = std::move(mask)](Tape& t, int self) {
    t.grad_buffer(xi) += t.node(self).grad.cwiseProduct(mask);
  });
}

Tensor softmax_cross_entropy(Tensor logits, std::vector<int> targets) {
  Tape& t = *logits.tape();
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw std::invalid_argument("softmax_cross_entropy: one target per row required");
  for (int c : targets)
    if (c < 0 || c >= logits.cols())
      throw std::out_of_range("softmax_cross_entropy: target class out of range");
  const int li = logits.id();
  const Mat& x = logits.value();
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Mat shifted = x.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    loss += lse(r) - shifted(r, targets[static_cast<size_t>(r)]);
  loss /= static_cast<double>(x.rows());
  Mat out(1, 1);
  out(0, 0) = loss;
  return t.emplace(std::move(out), {li},
                   [li, targets = std::move(targets)](Tape& t, int self) {
                     const double g = t.node(self).grad(0, 0);
                     const Mat& x = t.node(li).value;
                     Eigen::VectorXd mx = x.rowwise().maxCoeff();
                     Mat p = (x.colwise() - mx).array().exp();
                     Eigen::VectorXd sums = p.rowwise().sum();
                     p.array().colwise() /= sums.array();
                     const double inv_n = 1.0 / static_cast<double>(x.rows());
                     for (Eigen::Index r = 0; r < x.rows(); ++r)
                       p(r, targets[static_cast<size_t>(r)]) -= 1.0;
                     t.grad_buffer(li) += p * (g * inv_n);
                   });
}

Tensor binary_cross_entropy(Tensor probs, std::vector<double> labels) {
  Tape& t = *probs.tape();
  if (probs.cols() != 1 || static_cast<Eigen::Index>(labels.size()) != probs.rows())
    throw std::invalid_argument("binary_cross_entropy: probs must be n x 1 with n labels");
  const int pi = probs.id();
  const Mat& p = probs.value();
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    double pc = std::min(hi, std::max(lo, p(r, 0)));
    double y = labels[static_cast<size_t>(r)];
    loss += -y * std::log(pc) - (1.0 - y) * std::log(1.0 - pc);
  }
  loss /= static_cast<double>(p.rows());
  Mat out(1, 1);
  out(0, 0) = loss;
  return t.emplace(std::move(out), {pi},
                   [pi, labels = std::move(labels), lo, hi](Tape& t, int self) {
                     const double g = t.node(self).grad(0, 0);
                     const Mat& p = t.node(pi).value;
                     Mat& gp = t.grad_buffer(pi);
                     const double inv_n = 1.0 / static_cast<double>(p.rows());
                     for (Eigen::Index r = 0; r < p.rows(); ++r) {
                       if (p(r, 0) < lo || p(r, 0) > hi) continue;  // clamped flat region
                       double y = labels[static_cast<size_t>(r)];
                       gp(r, 0) += g * inv_n * (-y / p(r, 0) + (1.0 - y) / (1.0 - p(r, 0)));
                     }
                   });
}

std::uint64_t& attention_entry_counter() {
  thread_local std::uint64_t counter = 0;
  return counter;
}

Tensor scaled_dot_product_attention(Tensor q, Tensor k, Tensor v,
                                    const std::vector<std::uint8_t>& key_mask,
                                    const Dropout& drop) {
  Tape& t = same_tape(q, k);
  same_tape(k, v);
  if (q.cols() != k.cols())
    throw std::invalid_argument("attention: query/key widths disagree");
  if (k.rows() != v.rows())
    throw std::invalid_argument("attention: key/value counts disagree");
  if (!key_mask.empty()) {
    if (static_cast<Eigen::Index>(key_mask.size()) != k.rows())
      throw std::invalid_argument("attention: key mask length mismatch");
    bool any = false;
    for (auto m : key_mask) any = any || (m != 0);
    if (!any) throw std::invalid_argument("attention: every key is masked");
  }

  attention_entry_counter() +=
      static_cast<std::uint64_t>(q.rows()) * static_cast<std::uint64_t>(k.rows());

  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (!key_mask.empty()) {
    Mat bias = Mat::Zero(1, k.rows());
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      if (!key_mask[static_cast<size_t>(i)]) bias(0, i) = kMaskedScoreBias;
    scores = add_row_vector(scores, t.constant(std::move(bias)));
  }
  Tensor weights = dropout(softmax_rows(scores), drop);
  return matmul(weights, v);
}

Tensor multi_head_attention(Tensor x, const TransformerLayerParams& p, int heads,
                            const std::vector<std::uint8_t>& key_mask, const Dropout& drop) {
  const int hidden = x.cols();
  if (heads < 1 || hidden % heads != 0)
    throw std::invalid_argument("multi_head_attention: hidden size not divisible by heads");
  const int head_dim = hidden / heads;
  Tensor q = affine(x, p.attn_query_w, p.attn_query_b);
  Tensor k = affine(x, p.attn_key_w, p.attn_key_b);
  Tensor v = affine(x, p.attn_value_w, p.attn_value_b);
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int start = h * head_dim;
    outputs.push_back(scaled_dot_product_attention(slice_cols(q, start, head_dim),
                                                   slice_cols(k, start, head_dim),
                                                   slice_cols(v, start, head_dim), key_mask,
                                                   drop));
  }
  Tensor merged = heads == 1 ? outputs[0] : concat_cols(outputs);
  return affine(merged, p.attn_out_w, p.attn_out_b);
}

Tensor transformer_layer(Tensor x, const TransformerLayerParams& p, int heads,
                         const std::vector<std::uint8_t>& key_mask, const Dropout& drop) {
  Tensor attended = dropout(multi_head_attention(x, p, heads, key_mask, drop), drop);
  Tensor y = layer_norm(add(x, attended), p.norm1_gain, p.norm1_bias);
  Tensor ff = affine(gelu(affine(y, p.ff_in_w, p.ff_in_b)), p.ff_out_w, p.ff_out_b);
  Tensor out = layer_norm(add(y, dropout(ff, drop)), p.norm2_gain, p.norm2_bias);
  return out;
}

}  // namespace smith
