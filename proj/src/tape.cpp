#include "cclc/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cclc/error.hpp"
#include "cclc/kernels.hpp"
#include "cclc/rng.hpp"

namespace cclc {

// ---------------------------------------------------------------------------
// GradientMap
// ---------------------------------------------------------------------------

static const Tensor* find_entry(const std::vector<std::pair<int, Tensor>>& entries, int node) {
  auto it = std::lower_bound(entries.begin(), entries.end(), node,
                             [](const auto& e, int id) { return e.first < id; });
  if (it == entries.end() || it->first != node) return nullptr;
  return &it->second;
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
  if (!leaf.tracked()) throw value_error("GradientMap::at: tensor is not tracked");
  const Tensor* g = find_entry(entries_, leaf.node());
  if (g == nullptr) throw value_error("GradientMap::at: no gradient recorded for this leaf");
  return *g;
}

bool GradientMap::contains(const Tensor& leaf) const {
  return leaf.tracked() && find_entry(entries_, leaf.node()) != nullptr;
}

double GradientMap::global_norm() const {
  double sq = 0.0;
  for (const auto& [id, g] : entries_) {
    const double* p = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) sq += p[i] * p[i];
  }
  return std::sqrt(sq);
}

void GradientMap::scale_all(double factor) {
  for (auto& [id, g] : entries_) {
    double* p = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) p[i] *= factor;
  }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tensor Tape::watch(const Tensor& value) {
  if (!value.defined()) throw value_error("Tape::watch: undefined tensor");
  if (value.tracked()) throw value_error("Tape::watch: tensor is already tracked");
  Node node;
  node.shape = value.shape();
  node.leaf = true;
  nodes_.push_back(std::move(node));
  Tensor tracked = value;
  tracked.node_ = static_cast<int>(nodes_.size()) - 1;
  tracked.tape_ = this;
  return tracked;
}

Tensor Tape::record(Tensor value, BackwardFn backward) {
  Node node;
  node.backward = std::move(backward);
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  value.node_ = static_cast<int>(nodes_.size()) - 1;
  value.tape_ = this;
  return value;
}

GradientMap Tape::backward(const Tensor& loss) {
  if (!loss.tracked() || loss.tape() != this) {
    throw value_error("backward: loss is not tracked on this tape");
  }
  if (loss.size() != 1) {
    throw value_error("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }

  GradStore grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.node())] = Tensor(loss.shape(), {1.0});

  for (int id = loss.node(); id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads[static_cast<std::size_t>(id)];
    if (!g.defined() || !node.backward) continue;
    node.backward(g, grads);
  }

  GradientMap out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].leaf) continue;
    Tensor g = grads[id].defined() ? grads[id] : Tensor(nodes_[id].shape);
    out.entries_.emplace_back(static_cast<int>(id), std::move(g));
  }
  return out;
}

void accumulate_grad(Tape::GradStore& grads, const Tensor& parent,
                     const std::function<void(Tensor&)>& add_into) {
  if (!parent.tracked()) return;
  Tensor& slot = grads[static_cast<std::size_t>(parent.node())];
  if (!slot.defined()) slot = Tensor(parent.shape());
  add_into(slot);
}

// ---------------------------------------------------------------------------
// Op plumbing
// ---------------------------------------------------------------------------

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw value_error("operands are tracked on different tapes");
    }
  }
  return tape;
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw shape_error(std::string(op) + ": expected rank " + std::to_string(rank) +
                      " tensor, got shape " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw shape_error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw shape_error("matmul: inner extents differ: " + shape_string(a.shape()) + " * " +
                      shape_string(b.shape()));
  }
  Tensor out({m, n});
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n, false);

  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out), [av, bv, m, k, n](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      kernels::matmul_nt(go.data(), bv.data(), g.data(), m, n, k, true);
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      kernels::matmul_tn(av.data(), go.data(), g.data(), k, m, n, true);
    });
  });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  const int m = a.dim(0), n = a.dim(1);
  if (x.dim(0) != n) {
    throw shape_error("matvec: " + shape_string(a.shape()) + " * " + shape_string(x.shape()));
  }
  Tensor out({m});
  kernels::matmul(a.data(), x.data(), out.data(), m, n, 1, false);

  Tape* tape = common_tape({&a, &x});
  if (tape == nullptr) return out;
  Tensor av = a, xv = x;
  return tape->record(std::move(out), [av, xv, m, n](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      kernels::matmul(go.data(), xv.data(), g.data(), m, 1, n, true);
    });
    accumulate_grad(gs, xv, [&](Tensor& g) {
      kernels::matmul_tn(av.data(), go.data(), g.data(), n, m, 1, true);
    });
  });
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
  require_rank(x, 1, "vecmat");
  require_rank(a, 2, "vecmat");
  const int m = a.dim(0), n = a.dim(1);
  if (x.dim(0) != m) {
    throw shape_error("vecmat: " + shape_string(x.shape()) + " * " + shape_string(a.shape()));
  }
  Tensor out({n});
  kernels::matmul_tn(a.data(), x.data(), out.data(), n, m, 1, false);

  Tape* tape = common_tape({&x, &a});
  if (tape == nullptr) return out;
  Tensor xv = x, av = a;
  return tape->record(std::move(out), [xv, av, m, n](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, xv, [&](Tensor& g) {
      kernels::matmul(av.data(), go.data(), g.data(), m, n, 1, true);
    });
    accumulate_grad(gs, av, [&](Tensor& g) {
      kernels::matmul(xv.data(), go.data(), g.data(), m, 1, n, true);
    });
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  }

  Tape* tape = common_tape({&a});
  if (tape == nullptr) return out;
  Tensor av = a;
  return tape->record(std::move(out), [av, m, n](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) g.at(i, j) += go.at(j, i);
      }
    });
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor sigmoid(const Tensor& t) {
  Tensor out(t.shape());
  const double* in = t.data();
  double* o = out.data();
  for (std::size_t i = 0; i < t.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-in[i]));

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t, saved = out;
  return tape->record(std::move(out), [tv, saved](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      const double* y = saved.data();
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * y[i] * (1.0 - y[i]);
    });
  });
}

Tensor tanh(const Tensor& t) {
  Tensor out(t.shape());
  const double* in = t.data();
  double* o = out.data();
  for (std::size_t i = 0; i < t.size(); ++i) o[i] = std::tanh(in[i]);

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t, saved = out;
  return tape->record(std::move(out), [tv, saved](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      const double* y = saved.data();
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * (1.0 - y[i] * y[i]);
    });
  });
}

Tensor log(const Tensor& t) {
  Tensor out(t.shape());
  const double* in = t.data();
  double* o = out.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (in[i] <= 0.0) {
      throw value_error("log: nonpositive input " + std::to_string(in[i]) + " at flat index " +
                        std::to_string(i));
    }
    o[i] = std::log(in[i]);
  }

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t;
  return tape->record(std::move(out), [tv](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      const double* x = tv.data();
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] / x[i];
    });
  });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] * pb[i];

  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out), [av, bv](const Tensor& go, Tape::GradStore& gs) {
    const double* up = go.data();
    accumulate_grad(gs, av, [&](Tensor& g) {
      const double* x = bv.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * x[i];
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      const double* x = av.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * x[i];
    });
  });
}

Tensor mul_const(const Tensor& a, const Tensor& factor) {
  if (factor.tracked()) throw value_error("mul_const: factor must be an untracked constant");
  require_same_shape(a, factor, "mul_const");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pf = factor.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] * pf[i];

  Tape* tape = common_tape({&a});
  if (tape == nullptr) return out;
  Tensor av = a, fv = factor;
  return tape->record(std::move(out), [av, fv](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      const double* up = go.data();
      const double* x = fv.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * x[i];
    });
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] + pb[i];

  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out), [av, bv](const Tensor& go, Tape::GradStore& gs) {
    const double* up = go.data();
    accumulate_grad(gs, av, [&](Tensor& g) {
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i];
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i];
    });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] - pb[i];

  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out), [av, bv](const Tensor& go, Tape::GradStore& gs) {
    const double* up = go.data();
    accumulate_grad(gs, av, [&](Tensor& g) {
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i];
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] -= up[i];
    });
  });
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] * factor;

  Tape* tape = common_tape({&a});
  if (tape == nullptr) return out;
  Tensor av = a;
  return tape->record(std::move(out), [av, factor](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i] * factor;
    });
  });
}

Tensor add_scalar(const Tensor& a, double constant) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] + constant;

  Tape* tape = common_tape({&a});
  if (tape == nullptr) return out;
  Tensor av = a;
  return tape->record(std::move(out), [av](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += up[i];
    });
  });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  if (lo >= hi) throw value_error("clamp: lo must be below hi");
  Tensor out(t.shape());
  const double* in = t.data();
  double* o = out.data();
  for (std::size_t i = 0; i < t.size(); ++i) o[i] = std::min(std::max(in[i], lo), hi);

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t;
  return tape->record(std::move(out), [tv, lo, hi](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      const double* x = tv.data();
      const double* up = go.data();
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > lo && x[i] < hi) gp[i] += up[i];
      }
    });
  });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& t, int axis) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw shape_error("softmax: expected rank 1 or 2, got " + shape_string(t.shape()));
  }
  if (axis < 0 || axis >= t.rank()) {
    throw value_error("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                      shape_string(t.shape()));
  }
  const int rows = t.dim(0);
  const int cols = t.rank() == 1 ? 1 : t.dim(1);
  const bool along_rows = (t.rank() == 2 && axis == 1);

  Tensor out(t.shape());
  if (along_rows) {
    kernels::softmax_rows(t.data(), out.data(), rows, cols);
  } else {
    kernels::softmax_cols(t.data(), out.data(), rows, cols);
  }

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t, saved = out;
  return tape->record(std::move(out),
                [tv, saved, rows, cols, along_rows](const Tensor& go, Tape::GradStore& gs) {
                  accumulate_grad(gs, tv, [&](Tensor& g) {
                    const double* y = saved.data();
                    const double* up = go.data();
                    double* gp = g.data();
                    if (along_rows) {
                      for (int i = 0; i < rows; ++i) {
                        double dotv = 0.0;
                        for (int j = 0; j < cols; ++j) dotv += up[i * cols + j] * y[i * cols + j];
                        for (int j = 0; j < cols; ++j) {
                          gp[i * cols + j] += y[i * cols + j] * (up[i * cols + j] - dotv);
                        }
                      }
                    } else {
                      for (int j = 0; j < cols; ++j) {
                        double dotv = 0.0;
                        for (int i = 0; i < rows; ++i) dotv += up[i * cols + j] * y[i * cols + j];
                        for (int i = 0; i < rows; ++i) {
                          gp[i * cols + j] += y[i * cols + j] * (up[i * cols + j] - dotv);
                        }
                      }
                    }
                  });
                });
}

Tensor mean(const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.rank()) {
    throw value_error("mean: axis " + std::to_string(axis) + " invalid for shape " +
                      shape_string(t.shape()));
  }
  if (t.rank() == 1) {
    const int n = t.dim(0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += t.at(i);
    Tensor out = Tensor::scalar(total / n);

    Tape* tape = common_tape({&t});
    if (tape == nullptr) return out;
    Tensor tv = t;
    return tape->record(std::move(out), [tv, n](const Tensor& go, Tape::GradStore& gs) {
      accumulate_grad(gs, tv, [&](Tensor& g) {
        const double u = go.at(0) / n;
        for (int i = 0; i < n; ++i) g.at(i) += u;
      });
    });
  }
  require_rank(t, 2, "mean");
  const int rows = t.dim(0), cols = t.dim(1);
  if (axis == 0) {
    Tensor out({cols});
    for (int j = 0; j < cols; ++j) {
      double total = 0.0;
      for (int i = 0; i < rows; ++i) total += t.at(i, j);
      out.at(j) = total / rows;
    }
    Tape* tape = common_tape({&t});
    if (tape == nullptr) return out;
    Tensor tv = t;
    return tape->record(std::move(out), [tv, rows, cols](const Tensor& go, Tape::GradStore& gs) {
      accumulate_grad(gs, tv, [&](Tensor& g) {
        for (int j = 0; j < cols; ++j) {
          const double u = go.at(j) / rows;
          for (int i = 0; i < rows; ++i) g.at(i, j) += u;
        }
      });
    });
  }
  Tensor out({rows});
  for (int i = 0; i < rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < cols; ++j) total += t.at(i, j);
    out.at(i) = total / cols;
  }
  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t;
  return tape->record(std::move(out), [tv, rows, cols](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      for (int i = 0; i < rows; ++i) {
        const double u = go.at(i) / cols;
        for (int j = 0; j < cols; ++j) g.at(i, j) += u;
      }
    });
  });
}

Tensor sum(const Tensor& t) {
  double total = 0.0;
  const double* in = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) total += in[i];
  Tensor out = Tensor::scalar(total);

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t;
  return tape->record(std::move(out), [tv](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      const double u = go.at(0);
      double* gp = g.data();
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += u;
    });
  });
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank()) {
    throw shape_error("concat: rank mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  }
  if (axis < 0 || axis >= a.rank()) {
    throw value_error("concat: axis " + std::to_string(axis) + " invalid for shape " +
                      shape_string(a.shape()));
  }
  for (int d = 0; d < a.rank(); ++d) {
    if (d != axis && a.dim(d) != b.dim(d)) {
      throw shape_error("concat: off-axis extents differ: " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
    }
  }
  if (a.rank() > 2) throw shape_error("concat: rank > 2 not supported");

  Tape* tape = common_tape({&a, &b});

  if (a.rank() == 1) {
    const int na = a.dim(0), nb = b.dim(0);
    Tensor out({na + nb});
    for (int i = 0; i < na; ++i) out.at(i) = a.at(i);
    for (int i = 0; i < nb; ++i) out.at(na + i) = b.at(i);
    if (tape == nullptr) return out;
    Tensor av = a, bv = b;
    return tape->record(std::move(out), [av, bv, na, nb](const Tensor& go, Tape::GradStore& gs) {
      accumulate_grad(gs, av, [&](Tensor& g) {
        for (int i = 0; i < na; ++i) g.at(i) += go.at(i);
      });
      accumulate_grad(gs, bv, [&](Tensor& g) {
        for (int i = 0; i < nb; ++i) g.at(i) += go.at(na + i);
      });
    });
  }

  const int ra = a.dim(0), ca = a.dim(1);
  const int rb = b.dim(0), cb = b.dim(1);
  if (axis == 0) {
    Tensor out({ra + rb, ca});
    for (int i = 0; i < ra; ++i) {
      for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
    }
    for (int i = 0; i < rb; ++i) {
      for (int j = 0; j < ca; ++j) out.at(ra + i, j) = b.at(i, j);
    }
    if (tape == nullptr) return out;
    Tensor av = a, bv = b;
    return tape->record(std::move(out),
                        [av, bv, ra, rb, ca](const Tensor& go, Tape::GradStore& gs) {
      accumulate_grad(gs, av, [&](Tensor& g) {
        for (int i = 0; i < ra; ++i) {
          for (int j = 0; j < ca; ++j) g.at(i, j) += go.at(i, j);
        }
      });
      accumulate_grad(gs, bv, [&](Tensor& g) {
        for (int i = 0; i < rb; ++i) {
          for (int j = 0; j < ca; ++j) g.at(i, j) += go.at(ra + i, j);
        }
      });
    });
  }

  Tensor out({ra, ca + cb});
  for (int i = 0; i < ra; ++i) {
    for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
  }
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out),
                      [av, bv, ra, ca, cb](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, av, [&](Tensor& g) {
      for (int i = 0; i < ra; ++i) {
        for (int j = 0; j < ca; ++j) g.at(i, j) += go.at(i, j);
      }
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      for (int i = 0; i < ra; ++i) {
        for (int j = 0; j < cb; ++j) g.at(i, j) += go.at(i, ca + j);
      }
    });
  });
}

// ---------------------------------------------------------------------------
// Selection and pooling
// ---------------------------------------------------------------------------

KMaxResult k_max_pool(const Tensor& v, int k) {
  require_rank(v, 1, "k_max_pool");
  const int n = v.dim(0);
  if (k < 1 || k > n) {
    throw value_error("k_max_pool: k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(n) + "]");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // stable sort keeps the lower original index first among equal values
  std::stable_sort(order.begin(), order.end(),
                   [&](int lhs, int rhs) { return v.at(lhs) > v.at(rhs); });
  order.resize(static_cast<std::size_t>(k));

  Tensor values({k});
  for (int j = 0; j < k; ++j) values.at(j) = v.at(order[static_cast<std::size_t>(j)]);

  Tape* tape = common_tape({&v});
  KMaxResult result;
  if (tape == nullptr) {
    result.values = std::move(values);
  } else {
    Tensor vv = v;
    std::vector<int> idx = order;
    result.values =
        tape->record(std::move(values), [vv, idx, k](const Tensor& go, Tape::GradStore& gs) {
          accumulate_grad(gs, vv, [&](Tensor& g) {
            for (int j = 0; j < k; ++j) g.at(idx[static_cast<std::size_t>(j)]) += go.at(j);
          });
        });
  }
  result.indices = std::move(order);
  return result;
}

Tensor conv1d_max(const Tensor& seq, const Tensor& filters) {
  require_rank(seq, 2, "conv1d_max");
  require_rank(filters, 3, "conv1d_max");
  const int channels = seq.dim(0);
  const int width = filters.dim(0);
  const int nfilters = filters.dim(2);
  if (filters.dim(1) != channels) {
    throw shape_error("conv1d_max: filter channels " + std::to_string(filters.dim(1)) +
                      " do not match sequence channels " + std::to_string(channels));
  }

  // Right-zero-pad sequences narrower than the filter window.
  Tensor padded = seq.dim(1) >= width ? seq : pad_columns(seq, width);
  const int time = padded.dim(1);

  Tensor out({nfilters});
  std::vector<int> positions(static_cast<std::size_t>(nfilters));
  kernels::conv1d_max(padded.data(), channels, time, filters.data(), width, nfilters, out.data(),
                      positions.data());

  Tape* tape = common_tape({&padded, &filters});
  if (tape == nullptr) return out;
  Tensor sv = padded, fv = filters;
  return tape->record(std::move(out),
                [sv, fv, positions, channels, time, width, nfilters](const Tensor& go,
                                                                     Tape::GradStore& gs) {
                  accumulate_grad(gs, fv, [&](Tensor& g) {
                    for (int j = 0; j < nfilters; ++j) {
                      const int t0 = positions[static_cast<std::size_t>(j)];
                      const double u = go.at(j);
                      for (int w = 0; w < width; ++w) {
                        for (int c = 0; c < channels; ++c) {
                          g.at(w, c, j) += u * sv.at(c, t0 + w);
                        }
                      }
                    }
                  });
                  accumulate_grad(gs, sv, [&](Tensor& g) {
                    for (int j = 0; j < nfilters; ++j) {
                      const int t0 = positions[static_cast<std::size_t>(j)];
                      const double u = go.at(j);
                      for (int w = 0; w < width; ++w) {
                        for (int c = 0; c < channels; ++c) {
                          g.at(c, t0 + w) += u * fv.at(w, c, j);
                        }
                      }
                    }
                  });
                });
}

Tensor embed_columns(const Tensor& matrix, const std::vector<int>& rows, int pad_row) {
  require_rank(matrix, 2, "embed_columns");
  const int vocab = matrix.dim(0), dim = matrix.dim(1);
  const int time = static_cast<int>(rows.size());
  if (time == 0) throw value_error("embed_columns: empty row selection");
  for (int r : rows) {
    if (r < 0 || r >= vocab) {
      throw value_error("embed_columns: row " + std::to_string(r) + " outside [0, " +
                        std::to_string(vocab) + ")");
    }
  }

  Tensor out({dim, time});
  for (int t = 0; t < time; ++t) {
    const int r = rows[static_cast<std::size_t>(t)];
    for (int i = 0; i < dim; ++i) out.at(i, t) = matrix.at(r, i);
  }

  Tape* tape = common_tape({&matrix});
  if (tape == nullptr) return out;
  Tensor mv = matrix;
  std::vector<int> rv = rows;
  return tape->record(std::move(out),
                [mv, rv, dim, time, pad_row](const Tensor& go, Tape::GradStore& gs) {
                  accumulate_grad(gs, mv, [&](Tensor& g) {
                    for (int t = 0; t < time; ++t) {
                      const int r = rv[static_cast<std::size_t>(t)];
                      if (r == pad_row) continue;
                      for (int i = 0; i < dim; ++i) g.at(r, i) += go.at(i, t);
                    }
                  });
                });
}

Tensor select_columns(const Tensor& m, const std::vector<int>& cols) {
  require_rank(m, 2, "select_columns");
  const int rows = m.dim(0), width = m.dim(1);
  const int k = static_cast<int>(cols.size());
  if (k == 0) throw value_error("select_columns: empty column selection");
  for (int c : cols) {
    if (c < 0 || c >= width) {
      throw value_error("select_columns: column " + std::to_string(c) + " outside [0, " +
                        std::to_string(width) + ")");
    }
  }

  Tensor out({rows, k});
  for (int j = 0; j < k; ++j) {
    const int c = cols[static_cast<std::size_t>(j)];
    for (int i = 0; i < rows; ++i) out.at(i, j) = m.at(i, c);
  }

  Tape* tape = common_tape({&m});
  if (tape == nullptr) return out;
  Tensor mv = m;
  std::vector<int> cv = cols;
  return tape->record(std::move(out), [mv, cv, rows, k](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, mv, [&](Tensor& g) {
      for (int j = 0; j < k; ++j) {
        const int c = cv[static_cast<std::size_t>(j)];
        for (int i = 0; i < rows; ++i) g.at(i, c) += go.at(i, j);
      }
    });
  });
}

Tensor tile_columns(const Tensor& v, int count) {
  require_rank(v, 1, "tile_columns");
  if (count < 1) throw value_error("tile_columns: count must be positive");
  const int dim = v.dim(0);
  Tensor out({dim, count});
  for (int i = 0; i < dim; ++i) {
    for (int t = 0; t < count; ++t) out.at(i, t) = v.at(i);
  }

  Tape* tape = common_tape({&v});
  if (tape == nullptr) return out;
  Tensor vv = v;
  return tape->record(std::move(out), [vv, dim, count](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, vv, [&](Tensor& g) {
      for (int i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (int t = 0; t < count; ++t) acc += go.at(i, t);
        g.at(i) += acc;
      }
    });
  });
}

Tensor pad_columns(const Tensor& t, int min_time) {
  require_rank(t, 2, "pad_columns");
  const int rows = t.dim(0), time = t.dim(1);
  if (time >= min_time) return t;

  Tensor out({rows, min_time});
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < time; ++j) out.at(i, j) = t.at(i, j);
  }

  Tape* tape = common_tape({&t});
  if (tape == nullptr) return out;
  Tensor tv = t;
  return tape->record(std::move(out), [tv, rows, time](const Tensor& go, Tape::GradStore& gs) {
    accumulate_grad(gs, tv, [&](Tensor& g) {
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < time; ++j) g.at(i, j) += go.at(i, j);
      }
    });
  });
}

Tensor stack(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw value_error("stack: no inputs");
  const int n = static_cast<int>(scalars.size());
  Tensor out({n});
  std::vector<const Tensor*> refs;
  refs.reserve(scalars.size());
  for (const Tensor& s : scalars) {
    if (s.size() != 1) {
      throw shape_error("stack: inputs must be scalars, got " + shape_string(s.shape()));
    }
    refs.push_back(&s);
  }
  for (int i = 0; i < n; ++i) out.at(i) = scalars[static_cast<std::size_t>(i)].at(0);

  Tape* tape = nullptr;
  for (const Tensor& s : scalars) {
    Tape* st = common_tape({&s});
    if (st != nullptr) {
      if (tape != nullptr && tape != st) {
        throw value_error("stack: operands are tracked on different tapes");
      }
      tape = st;
    }
  }
  if (tape == nullptr) return out;

  std::vector<Tensor> saved = scalars;
  return tape->record(std::move(out), [saved, n](const Tensor& go, Tape::GradStore& gs) {
    for (int i = 0; i < n; ++i) {
      accumulate_grad(gs, saved[static_cast<std::size_t>(i)],
                      [&](Tensor& g) { g.at(0) += go.at(i); });
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "dot");
  require_rank(b, 1, "dot");
  require_same_shape(a, b, "dot");
  const int n = a.dim(0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += a.at(i) * b.at(i);
  Tensor out = Tensor::scalar(total);

  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return out;
  Tensor av = a, bv = b;
  return tape->record(std::move(out), [av, bv, n](const Tensor& go, Tape::GradStore& gs) {
    const double u = go.at(0);
    accumulate_grad(gs, av, [&](Tensor& g) {
      for (int i = 0; i < n; ++i) g.at(i) += u * bv.at(i);
    });
    accumulate_grad(gs, bv, [&](Tensor& g) {
      for (int i = 0; i < n; ++i) g.at(i) += u * av.at(i);
    });
  });
}

Tensor dropout(const Tensor& t, double ratio, Rng& rng, bool train) {
  if (!train || ratio == 0.0) return t;
  if (ratio < 0.0 || ratio >= 1.0) {
    throw value_error("dropout: ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
  Tensor mask(t.shape());
  const double keep_scale = 1.0 / (1.0 - ratio);
  double* m = mask.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    m[i] = rng.uniform(0.0, 1.0) >= ratio ? keep_scale : 0.0;
  }
  return mul_const(t, mask);
}

}  // namespace cclc
