#include "pihnn/autodiff.hpp"

#include <string>

namespace pihnn {

namespace {

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string("tape ") + op + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                        ")");
  }
}

}  // namespace

const Tape::Node& Tape::checked(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw ContractError("tape: invalid variable handle");
  return nodes_[v.id];
}

Tape::Var Tape::push(Node node) {
  const CMatrix* a = node.a >= 0 ? &nodes_[node.a].value : nullptr;
  const CMatrix* b = node.b >= 0 ? &nodes_[node.b].value : nullptr;
  const CMatrix* c = node.c >= 0 ? &nodes_[node.c].value : nullptr;
  if (node.op != Op::Constant && node.op != Op::Parameter) node.value = compute(node, a, b, c);
  node.needs_grad = node.op == Op::Parameter || (node.a >= 0 && nodes_[node.a].needs_grad) ||
                    (node.b >= 0 && nodes_[node.b].needs_grad) || (node.c >= 0 && nodes_[node.c].needs_grad);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

CMatrix Tape::compute(Node& node, const CMatrix* a, const CMatrix* b, const CMatrix* c) const {
  switch (node.op) {
    case Op::Constant:
    case Op::Parameter:
      return node.value;
    case Op::JetAffine: {
      // a = W (N x M), b = bias (N x 1), c = X (M x 3B)
      if (a->cols() != c->rows() || b->rows() != a->rows() || b->cols() != 1 || c->cols() % 3 != 0) {
        throw ContractError("tape jet_affine: incompatible shapes");
      }
      CMatrix y = (*a) * (*c);
      const Eigen::Index batch = c->cols() / 3;
      y.leftCols(batch).colwise() += b->col(0);
      return y;
    }
    case Op::JetActivate: {
      if (a->cols() % 3 != 0) throw ContractError("tape jet_activate: expected 3 jet blocks");
      const Eigen::Index n = a->rows();
      const Eigen::Index batch = a->cols() / 3;
      CMatrix out(n, 3 * batch);
      node.aux.resize(n, 3 * batch);
      for (Eigen::Index j = 0; j < batch; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const C64 f = (*a)(i, j);
          const C64 d1 = (*a)(i, batch + j);
          const C64 d2 = (*a)(i, 2 * batch + j);
          const ActivationDerivs ad = activation_derivs(node.activation, f);
          out(i, j) = ad.d0;
          out(i, batch + j) = ad.d1 * d1;
          out(i, 2 * batch + j) = ad.d2 * d1 * d1 + ad.d1 * d2;
          node.aux(i, j) = ad.d1;
          node.aux(i, batch + j) = ad.d2;
          node.aux(i, 2 * batch + j) = ad.d3;
        }
      }
      return out;
    }
    case Op::Cols:
      if (node.start < 0 || node.count < 0 || node.start + node.count > a->cols()) {
        throw ContractError("tape cols: column range out of bounds");
      }
      return a->middleCols(node.start, node.count);
    case Op::Add:
      require_same_shape(*a, *b, "add");
      return *a + *b;
    case Op::Sub:
      require_same_shape(*a, *b, "sub");
      return *a - *b;
    case Op::Scale:
      return node.factor * (*a);
    case Op::MulConst:
      require_same_shape(*a, node.aux, "mul_const");
      return a->cwiseProduct(node.aux);
    case Op::AddConst:
      require_same_shape(*a, node.aux, "add_const");
      return *a + node.aux;
    case Op::Mul:
      require_same_shape(*a, *b, "mul");
      return a->cwiseProduct(*b);
    case Op::Conj:
      return a->conjugate();
    case Op::Real:
      return a->real().cast<C64>();
    case Op::Imag:
      return a->imag().cast<C64>();
    case Op::Abs2:
      return a->cwiseAbs2().cast<C64>();
    case Op::WeightedSum: {
      if (a->rows() != 1 || a->cols() != node.weights.size()) {
        throw ContractError("tape weighted_sum: expected a row vector matching the weight count");
      }
      C64 sum = 0.0;
      for (Eigen::Index j = 0; j < a->cols(); ++j) sum += node.weights[j] * (*a)(0, j);
      CMatrix out(1, 1);
      out(0, 0) = sum;
      return out;
    }
  }
  throw ContractError("tape: unknown op");
}

Tape::Var Tape::constant(CMatrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::parameter(CMatrix value) {
  Node n;
  n.op = Op::Parameter;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::jet_affine(Var weights, Var bias, Var x) {
  Node n;
  n.op = Op::JetAffine;
  n.a = (checked(weights), weights.id);
  n.b = (checked(bias), bias.id);
  n.c = (checked(x), x.id);
  return push(std::move(n));
}

Tape::Var Tape::jet_activate(ActivationKind kind, Var y) {
  Node n;
  n.op = Op::JetActivate;
  n.a = (checked(y), y.id);
  n.activation = kind;
  return push(std::move(n));
}

Tape::Var Tape::cols(Var a, int start, int count) {
  Node n;
  n.op = Op::Cols;
  n.a = (checked(a), a.id);
  n.start = start;
  n.count = count;
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.a = (checked(a), a.id);
  n.b = (checked(b), b.id);
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::Sub;
  n.a = (checked(a), a.id);
  n.b = (checked(b), b.id);
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, C64 factor) {
  Node n;
  n.op = Op::Scale;
  n.a = (checked(a), a.id);
  n.factor = factor;
  return push(std::move(n));
}

Tape::Var Tape::mul_const(Var a, CMatrix factor) {
  Node n;
  n.op = Op::MulConst;
  n.a = (checked(a), a.id);
  n.aux = std::move(factor);
  return push(std::move(n));
}

Tape::Var Tape::add_const(Var a, CMatrix offset) {
  Node n;
  n.op = Op::AddConst;
  n.a = (checked(a), a.id);
  n.aux = std::move(offset);
  return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::Mul;
  n.a = (checked(a), a.id);
  n.b = (checked(b), b.id);
  return push(std::move(n));
}

Tape::Var Tape::conj(Var a) {
  Node n;
  n.op = Op::Conj;
  n.a = (checked(a), a.id);
  return push(std::move(n));
}

Tape::Var Tape::real(Var a) {
  Node n;
  n.op = Op::Real;
  n.a = (checked(a), a.id);
  return push(std::move(n));
}

Tape::Var Tape::imag(Var a) {
  Node n;
  n.op = Op::Imag;
  n.a = (checked(a), a.id);
  return push(std::move(n));
}

Tape::Var Tape::abs2(Var a) {
  Node n;
  n.op = Op::Abs2;
  n.a = (checked(a), a.id);
  return push(std::move(n));
}

Tape::Var Tape::weighted_sum(Var a, Eigen::VectorXd weights) {
  Node n;
  n.op = Op::WeightedSum;
  n.a = (checked(a), a.id);
  n.weights = std::move(weights);
  return push(std::move(n));
}

void Tape::accumulate(int id, const CMatrix& contribution) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = contribution;
  } else {
    n.grad += contribution;
  }
}

void Tape::propagate(const Node& node) {
  const CMatrix& g = node.grad;
  switch (node.op) {
    case Op::Constant:
    case Op::Parameter:
      return;
    case Op::JetAffine: {
      const CMatrix& w = nodes_[node.a].value;
      const CMatrix& x = nodes_[node.c].value;
      const Eigen::Index batch = x.cols() / 3;
      if (nodes_[node.a].needs_grad) accumulate(node.a, g * x.adjoint());
      if (nodes_[node.b].needs_grad) accumulate(node.b, g.leftCols(batch).rowwise().sum());
      if (nodes_[node.c].needs_grad) accumulate(node.c, w.adjoint() * g);
      return;
    }
    case Op::JetActivate: {
      const CMatrix& y = nodes_[node.a].value;
      const Eigen::Index batch = y.cols() / 3;
      const auto d1 = y.middleCols(batch, batch).array();
      const auto d2 = y.rightCols(batch).array();
      const auto a1 = node.aux.leftCols(batch).array();
      const auto a2 = node.aux.middleCols(batch, batch).array();
      const auto a3 = node.aux.rightCols(batch).array();
      const auto gf = g.leftCols(batch).array();
      const auto gd1 = g.middleCols(batch, batch).array();
      const auto gd2 = g.rightCols(batch).array();
      CMatrix gy(y.rows(), y.cols());
      // value:  a(f);  first: a'(f) d1;  second: a''(f) d1^2 + a'(f) d2
      gy.leftCols(batch) =
          (gf * a1.conjugate() + gd1 * (a2 * d1).conjugate() + gd2 * (a3 * d1 * d1 + a2 * d2).conjugate()).matrix();
      gy.middleCols(batch, batch) = (gd1 * a1.conjugate() + gd2 * (2.0 * a2 * d1).conjugate()).matrix();
      gy.rightCols(batch) = (gd2 * a1.conjugate()).matrix();
      accumulate(node.a, gy);
      return;
    }
    case Op::Cols: {
      const CMatrix& a = nodes_[node.a].value;
      CMatrix ga = CMatrix::Zero(a.rows(), a.cols());
      ga.middleCols(node.start, node.count) = g;
      accumulate(node.a, ga);
      return;
    }
    case Op::Add:
      accumulate(node.a, g);
      accumulate(node.b, g);
      return;
    case Op::Sub:
      accumulate(node.a, g);
      accumulate(node.b, -g);
      return;
    case Op::Scale:
      accumulate(node.a, std::conj(node.factor) * g);
      return;
    case Op::MulConst:
      accumulate(node.a, g.cwiseProduct(node.aux.conjugate()));
      return;
    case Op::AddConst:
      accumulate(node.a, g);
      return;
    case Op::Mul:
      accumulate(node.a, g.cwiseProduct(nodes_[node.b].value.conjugate()));
      accumulate(node.b, g.cwiseProduct(nodes_[node.a].value.conjugate()));
      return;
    case Op::Conj:
      accumulate(node.a, g.conjugate());
      return;
    case Op::Real:
      accumulate(node.a, g.real().cast<C64>());
      return;
    case Op::Imag:
      accumulate(node.a, (C64(0.0, 1.0) * g.real().cast<C64>()).eval());
      return;
    case Op::Abs2:
      accumulate(node.a, (2.0 * nodes_[node.a].value.array() * g.real().cast<C64>().array()).matrix());
      return;
    case Op::WeightedSum: {
      const C64 gs = g(0, 0);
      CMatrix ga(1, node.weights.size());
      for (Eigen::Index j = 0; j < ga.cols(); ++j) ga(0, j) = node.weights[j] * gs;
      accumulate(node.a, ga);
      return;
    }
  }
}

void Tape::backward(Var output) {
  const Node& out = checked(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) throw ContractError("tape backward: output is not a scalar");
  backward(output, CMatrix::Ones(1, 1));
}

void Tape::backward(Var output, const CMatrix& seed) {
  const Node& out = checked(output);
  require_same_shape(out.value, seed, "backward seed");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  accumulate(output.id, seed);
  for (int id = output.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    propagate(n);
  }
}

CMatrix Tape::grad(Var v) const {
  const Node& n = checked(v);
  if (n.grad.size() == 0) return CMatrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

CMatrix Tape::replay(Var output) const {
  checked(output);
  std::vector<CMatrix> values(output.id + 1);
  for (int id = 0; id <= output.id; ++id) {
    Node copy = nodes_[id];
    const CMatrix* a = copy.a >= 0 ? &values[copy.a] : nullptr;
    const CMatrix* b = copy.b >= 0 ? &values[copy.b] : nullptr;
    const CMatrix* c = copy.c >= 0 ? &values[copy.c] : nullptr;
    values[id] = compute(copy, a, b, c);
  }
  return values[output.id];
}

}  // namespace pihnn
