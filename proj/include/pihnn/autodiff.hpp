#pragma once

#include <Eigen/Dense>

#include <vector>

#include "pihnn/complexcore.hpp"

namespace pihnn {

using CMatrix = Eigen::MatrixXcd;

/// Reverse-mode tape over complex matrices, for real scalar losses.
///
/// Every node stores its value and, after backward(), the adjoint
///   g = dL/dRe(v) + i dL/dIm(v)
/// elementwise. With that convention a holomorphic op y = h(x) pulls back as
/// g_x = conj(h'(x)) g_y, and a real loss L = Re(w) gives g_w = 1, |w|^2 gives
/// 2w. The real and imaginary parts of the adjoint of a parameter are exactly
/// the pair (dL/dRe w, dL/dIm w) a real optimizer consumes.
///
/// Non-holomorphic ops (conj, real, imag, abs2) carry their own rules. Nodes
/// produced by real/imag/abs2 hold real values in a complex container and
/// receive real adjoints.
///
/// Jet-valued quantities are stored block-wise: a batch of B jets over N units
/// is an N x 3B matrix [values | first derivatives | second derivatives].
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  Var constant(CMatrix value);
  Var parameter(CMatrix value);

  /// Y = W X with the bias added to the value block only.
  Var jet_affine(Var weights, Var bias, Var x);
  /// Applies the activation jet-wise to a N x 3B block matrix.
  Var jet_activate(ActivationKind kind, Var y);

  Var cols(Var a, int start, int count);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, C64 factor);
  Var mul_const(Var a, CMatrix factor);
  Var add_const(Var a, CMatrix offset);
  Var mul(Var a, Var b);

  Var conj(Var a);
  Var real(Var a);
  Var imag(Var a);
  Var abs2(Var a);
  /// sum_j w_j a(0, j) over a row vector, summed in index order.
  Var weighted_sum(Var a, Eigen::VectorXd weights);

  const CMatrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const { return value(v)(0, 0).real(); }

  /// Seeds dL/d(output) = 1 on a 1x1 real output and propagates.
  void backward(Var output);
  /// Seeds an arbitrary adjoint on any node and propagates.
  void backward(Var output, const CMatrix& seed);

  /// Adjoint of a node; zero matrix when no gradient reached it.
  CMatrix grad(Var v) const;

  /// Recomputes every node from the leaves in recorded order and returns the
  /// recomputed value of `output`. Recorded values are left untouched.
  CMatrix replay(Var output) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Constant,
    Parameter,
    JetAffine,
    JetActivate,
    Cols,
    Add,
    Sub,
    Scale,
    MulConst,
    AddConst,
    Mul,
    Conj,
    Real,
    Imag,
    Abs2,
    WeightedSum
  };

  struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    int c = -1;
    bool needs_grad = false;
    ActivationKind activation = ActivationKind::Exp;
    int start = 0;
    int count = 0;
    C64 factor{};
    CMatrix aux;
    Eigen::VectorXd weights;
    CMatrix value;
    CMatrix grad;
  };

  Var push(Node node);
  CMatrix compute(Node& node, const CMatrix* a, const CMatrix* b, const CMatrix* c) const;
  void accumulate(int id, const CMatrix& contribution);
  void propagate(const Node& node);
  const Node& checked(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace pihnn
