#include "pihnn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace pihnn {

namespace {

template <typename Fn>
void for_each_branch(const Networks& nets, Fn fn) {
  for (const NetPair& pair : nets) {
    fn(pair.phi);
    fn(pair.psi);
  }
}

void append(std::vector<double>& out, const LayerParams& layer) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      out.push_back(layer.weights(r, c).real());
      out.push_back(layer.weights(r, c).imag());
    }
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
    out.push_back(layer.bias(r).real());
    out.push_back(layer.bias(r).imag());
  }
}

std::size_t assign(LayerParams& layer, std::span<const double> values, std::size_t k) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = {values[k], values[k + 1]};
      k += 2;
    }
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
    layer.bias(r) = {values[k], values[k + 1]};
    k += 2;
  }
  return k;
}

CMatrix row_of(const std::vector<double>& v) {
  CMatrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = v[j];
  return m;
}

struct FieldVars {
  Tape::Var sxx, syy, sxy, ux, uy;
  bool has_displacement = false;
};

struct GroupSlice {
  int start = 0;
  std::vector<std::size_t> samples;  // batch indices, ascending
};

// Samples touched by one subdomain, laid out group by group.
struct SubdomainBatch {
  std::vector<C64> zs;
  std::map<GroupKey, GroupSlice> groups;
};

std::vector<SubdomainBatch> arrange(std::span<const BoundarySample> batch, const ProblemSpec& problem) {
  const int n_sub = problem.domain.n_subdomains;
  std::vector<std::map<GroupKey, std::vector<std::size_t>>> members(n_sub);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BoundarySample& s = batch[i];
    if (s.piece < 0 || s.piece >= static_cast<int>(problem.domain.pieces.size())) {
      throw ContractError("loss: sample " + std::to_string(i) + " refers to an unknown piece");
    }
    const GroupKey key = group_of(problem.domain.pieces[s.piece]);
    members[key.subdomain][key].push_back(i);
    if (key.partner >= 0) members[key.partner][key].push_back(i);
  }
  std::vector<SubdomainBatch> out(n_sub);
  for (int s = 0; s < n_sub; ++s) {
    for (auto& [key, idx] : members[s]) {
      GroupSlice slice;
      slice.start = static_cast<int>(out[s].zs.size());
      for (std::size_t i : idx) out[s].zs.push_back(batch[i].z);
      slice.samples = std::move(idx);
      out[s].groups.emplace(key, std::move(slice));
    }
  }
  return out;
}

FieldVars record_fields(Tape& tape, const MlpRecord& phi, const MlpRecord& psi, std::span<const C64> zs,
                        NetworkMode mode, const Material& mat) {
  const int b = static_cast<int>(zs.size());
  CMatrix zrow(1, b);
  for (int j = 0; j < b; ++j) zrow(0, j) = zs[j];
  const bool standard = mode == NetworkMode::Standard;
  const Tape::Var dphi = tape.cols(phi.output, standard ? b : 0, b);
  const Tape::Var ddphi = tape.cols(phi.output, standard ? 2 * b : b, b);
  const Tape::Var dpsi = tape.cols(psi.output, standard ? b : 0, b);

  const Tape::Var zbar_ddphi = tape.mul_const(ddphi, zrow.conjugate());
  const Tape::Var two_dphi = tape.scale(dphi, 2.0);
  FieldVars f;
  f.sxx = tape.real(tape.sub(tape.sub(two_dphi, zbar_ddphi), dpsi));
  f.syy = tape.real(tape.add(tape.add(two_dphi, zbar_ddphi), dpsi));
  f.sxy = tape.imag(tape.add(zbar_ddphi, dpsi));
  if (standard) {
    const Tape::Var phi_v = tape.cols(phi.output, 0, b);
    const Tape::Var psi_v = tape.cols(psi.output, 0, b);
    const Tape::Var u = tape.scale(
        tape.sub(tape.sub(tape.scale(phi_v, mat.gamma()), tape.mul_const(tape.conj(dphi), zrow)), tape.conj(psi_v)),
        1.0 / (2.0 * mat.mu()));
    f.ux = tape.real(u);
    f.uy = tape.imag(u);
    f.has_displacement = true;
  }
  return f;
}

FieldVars slice(Tape& tape, const FieldVars& f, int start, int count) {
  FieldVars s;
  s.sxx = tape.cols(f.sxx, start, count);
  s.syy = tape.cols(f.syy, start, count);
  s.sxy = tape.cols(f.sxy, start, count);
  s.has_displacement = f.has_displacement;
  if (f.has_displacement) {
    s.ux = tape.cols(f.ux, start, count);
    s.uy = tape.cols(f.uy, start, count);
  }
  return s;
}

std::pair<Tape::Var, Tape::Var> traction(Tape& tape, const FieldVars& f, const CMatrix& nx, const CMatrix& ny) {
  return {tape.add(tape.mul_const(f.sxx, nx), tape.mul_const(f.sxy, ny)),
          tape.add(tape.mul_const(f.sxy, nx), tape.mul_const(f.syy, ny))};
}

}  // namespace

std::vector<double> flatten(const Networks& nets) {
  std::vector<double> out;
  for_each_branch(nets, [&](const HoloMLP& net) {
    for (const auto& layer : net.layers) append(out, layer);
  });
  return out;
}

std::vector<double> flatten(const WeightGrad& grad) {
  std::vector<double> out;
  for (const PairGrad& pair : grad.nets) {
    for (const auto& layer : pair.phi) append(out, layer);
    for (const auto& layer : pair.psi) append(out, layer);
  }
  return out;
}

void unflatten(Networks& nets, std::span<const double> values) {
  std::size_t k = 0;
  std::size_t total = 0;
  for_each_branch(nets, [&](const HoloMLP& net) { total += 2 * net.parameter_count(); });
  if (values.size() != total) throw ContractError("unflatten: parameter count mismatch");
  for (NetPair& pair : nets) {
    for (auto& layer : pair.phi.layers) k = assign(layer, values, k);
    for (auto& layer : pair.psi.layers) k = assign(layer, values, k);
  }
}

CMatrix jet_input(std::span<const C64> zs) {
  const auto b = static_cast<Eigen::Index>(zs.size());
  CMatrix x(1, 3 * b);
  for (Eigen::Index j = 0; j < b; ++j) {
    x(0, j) = zs[j];
    x(0, b + j) = 1.0;
    x(0, 2 * b + j) = 0.0;
  }
  return x;
}

MlpRecord record_mlp(Tape& tape, const HoloMLP& net, Tape::Var x) {
  MlpRecord rec;
  Tape::Var h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerParams& layer = net.layers[l];
    rec.weights.push_back(tape.parameter(layer.weights));
    rec.biases.push_back(tape.parameter(layer.bias));
    const Tape::Var y = tape.jet_affine(rec.weights.back(), rec.biases.back(), h);
    rec.preactivations.push_back(y);
    h = l + 1 < net.layers.size() ? tape.jet_activate(net.activation, y) : y;
  }
  rec.output = h;
  return rec;
}

LossTape loss_forward(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem) {
  if (batch.empty()) throw ContractError("loss_forward: empty batch");
  if (static_cast<int>(nets.size()) != problem.domain.n_subdomains) {
    throw ContractError("loss_forward: " + std::to_string(nets.size()) + " network pairs for " +
                        std::to_string(problem.domain.n_subdomains) + " subdomains");
  }
  const std::vector<SubdomainBatch> layout = arrange(batch, problem);
  const std::map<GroupKey, double> lengths = problem.domain.group_lengths();
  const double outer = problem.domain.outer_length();

  LossTape lt;
  Tape& tape = lt.tape;
  std::vector<FieldVars> fields(nets.size());
  lt.records.resize(nets.size());
  for (std::size_t s = 0; s < nets.size(); ++s) {
    const NetPair& pair = nets[s];
    if (pair.phi.mode != pair.psi.mode) throw ContractError("loss_forward: phi and psi networks differ in mode");
    pair.phi.validate();
    pair.psi.validate();
    const Tape::Var x = tape.constant(jet_input(layout[s].zs));
    lt.records[s][0] = record_mlp(tape, pair.phi, x);
    lt.records[s][1] = record_mlp(tape, pair.psi, x);
    fields[s] = record_fields(tape, lt.records[s][0], lt.records[s][1], layout[s].zs, pair.phi.mode,
                              problem.material);
  }

  // Residual components per group, plus the batch indices behind the columns.
  std::vector<std::pair<std::vector<Tape::Var>, const std::vector<std::size_t>*>> residual_rows;
  bool have_loss = false;
  for (const auto& [key, length] : lengths) {
    const GroupSlice* own = nullptr;
    if (auto it = layout[key.subdomain].groups.find(key); it != layout[key.subdomain].groups.end()) own = &it->second;
    if (own == nullptr) {
      if (length > 0.0) throw ContractError("loss_forward: group " + key.label() + " has length but no samples");
      continue;
    }
    const int count = static_cast<int>(own->samples.size());
    std::vector<double> nx(count), ny(count), vx(count), vy(count);
    for (int k = 0; k < count; ++k) {
      const BoundarySample& smp = batch[own->samples[k]];
      nx[k] = smp.normal.x;
      ny[k] = smp.normal.y;
      const Vec2 v = problem.domain.pieces[smp.piece].bc.value.at(smp.normal);
      vx[k] = v.x;
      vy[k] = v.y;
    }
    const CMatrix nxr = row_of(nx);
    const CMatrix nyr = row_of(ny);
    const FieldVars f = slice(tape, fields[key.subdomain], own->start, count);
    auto require_displacement = [&](const FieldVars& fv) {
      if (!fv.has_displacement) {
        throw ContractError("loss_forward: group " + key.label() + " needs displacements from stress-only networks");
      }
    };

    std::vector<Tape::Var> parts;
    switch (key.kind) {
      case BCKind::Traction: {
        const auto [tx, ty] = traction(tape, f, nxr, nyr);
        parts = {tape.add_const(tx, -row_of(vx)), tape.add_const(ty, -row_of(vy))};
        break;
      }
      case BCKind::Displacement:
        require_displacement(f);
        parts = {tape.add_const(f.ux, -row_of(vx)), tape.add_const(f.uy, -row_of(vy))};
        break;
      case BCKind::Symmetry: {
        require_displacement(f);
        const auto [tx, ty] = traction(tape, f, nxr, nyr);
        parts = {tape.sub(tape.mul_const(tx, nyr), tape.mul_const(ty, nxr)),
                 tape.add(tape.mul_const(f.ux, nxr), tape.mul_const(f.uy, nyr))};
        break;
      }
      case BCKind::Interface: {
        const GroupSlice& other = layout[key.partner].groups.at(key);
        const FieldVars g = slice(tape, fields[key.partner], other.start, count);
        require_displacement(f);
        require_displacement(g);
        const auto [tx1, ty1] = traction(tape, f, nxr, nyr);
        const auto [tx2, ty2] = traction(tape, g, nxr, nyr);
        parts = {tape.sub(f.ux, g.ux), tape.sub(f.uy, g.uy), tape.sub(tx1, tx2), tape.sub(ty1, ty2)};
        break;
      }
    }
    Tape::Var sq = tape.abs2(parts[0]);
    for (std::size_t k = 1; k < parts.size(); ++k) sq = tape.add(sq, tape.abs2(parts[k]));
    const double alpha = loss_weight(length, outer);
    const Tape::Var term = tape.weighted_sum(sq, Eigen::VectorXd::Constant(count, alpha / count));
    lt.group_terms.emplace(key, term);
    lt.loss = have_loss ? tape.add(lt.loss, term) : term;
    have_loss = true;
    residual_rows.emplace_back(std::move(parts), &own->samples);
  }
  if (!have_loss) throw ContractError("loss_forward: no loss groups");

  if (!std::isfinite(lt.value())) {
    std::size_t first = std::numeric_limits<std::size_t>::max();
    for (const auto& [parts, samples] : residual_rows) {
      for (const Tape::Var& p : parts) {
        const CMatrix& v = tape.value(p);
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
          if (!is_finite(v(0, j))) first = std::min(first, (*samples)[j]);
        }
      }
    }
    throw NonFiniteError("loss_forward: non-finite loss (first offending sample " +
                         (first == std::numeric_limits<std::size_t>::max() ? std::string("unknown")
                                                                           : std::to_string(first)) +
                         ")");
  }
  return lt;
}

WeightGrad loss_backward(LossTape& lt) {
  lt.tape.backward(lt.loss);
  WeightGrad out;
  out.nets.resize(lt.records.size());
  for (std::size_t s = 0; s < lt.records.size(); ++s) {
    for (int branch = 0; branch < 2; ++branch) {
      const MlpRecord& rec = lt.records[s][branch];
      std::vector<LayerParams>& dst = branch == 0 ? out.nets[s].phi : out.nets[s].psi;
      for (std::size_t l = 0; l < rec.weights.size(); ++l) {
        dst.push_back({lt.tape.grad(rec.weights[l]), lt.tape.grad(rec.biases[l]).col(0)});
      }
    }
  }
  return out;
}

std::vector<FieldPoint> eval_fields(const NetPair& pair, std::span<const C64> zs, const Material& mat) {
  if (pair.phi.mode != pair.psi.mode) throw ContractError("eval_fields: phi and psi networks differ in mode");
  const std::vector<Jet2> phi = forward_batch(pair.phi, zs);
  const std::vector<Jet2> psi = forward_batch(pair.psi, zs);
  const bool standard = pair.phi.mode == NetworkMode::Standard;
  std::vector<FieldPoint> out(zs.size());
  for (std::size_t j = 0; j < zs.size(); ++j) {
    out[j] = km_fields(zs[j], km_state_from_jets(phi[j], psi[j], pair.phi.mode), mat, standard);
  }
  return out;
}

std::vector<SampleResidual> sample_residuals(const Networks& nets, std::span<const BoundarySample> batch,
                                             const ProblemSpec& problem) {
  if (static_cast<int>(nets.size()) != problem.domain.n_subdomains) {
    throw ContractError("sample_residuals: network count does not match the subdomain count");
  }
  const std::vector<SubdomainBatch> layout = arrange(batch, problem);
  // fields[s][i]: field of subdomain s at batch sample i, where evaluated
  std::vector<std::map<std::size_t, FieldPoint>> fields(nets.size());
  for (std::size_t s = 0; s < nets.size(); ++s) {
    if (layout[s].zs.empty()) continue;
    const std::vector<FieldPoint> f = eval_fields(nets[s], layout[s].zs, problem.material);
    for (const auto& [key, slice] : layout[s].groups) {
      for (std::size_t k = 0; k < slice.samples.size(); ++k) fields[s][slice.samples[k]] = f[slice.start + k];
    }
  }
  std::vector<SampleResidual> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BoundarySample& smp = batch[i];
    const BoundaryPiece& piece = problem.domain.pieces[smp.piece];
    SampleResidual r;
    r.index = i;
    r.group = group_of(piece);
    if (r.group.partner >= 0) {
      r.residual = interface_residual(fields[r.group.subdomain].at(i), fields[r.group.partner].at(i), smp.normal);
    } else {
      r.residual = bc_residual(piece.bc, fields[r.group.subdomain].at(i), smp.normal, smp.z);
    }
    out.push_back(std::move(r));
  }
  return out;
}

LossBreakdown evaluate_loss(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem) {
  if (batch.empty()) throw ContractError("evaluate_loss: empty batch");
  const std::vector<SampleResidual> residuals = sample_residuals(nets, batch, problem);
  return assemble_loss(residuals, problem.domain.group_lengths(), problem.domain.outer_length());
}

double grad_check(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem,
                  double step) {
  if (!(step > 0.0 && step <= 1e-3)) throw ContractError("grad_check: step must lie in (0, 1e-3]");
  LossTape lt = loss_forward(nets, batch, problem);
  const std::vector<double> grad = flatten(loss_backward(lt));
  const std::vector<double> base = flatten(nets);
  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  const double floor = 1e-3 * gmax;

  Networks probe = nets;
  std::vector<double> x = base;
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = base[k] + step;
    unflatten(probe, x);
    const double plus = evaluate_loss(probe, batch, problem).total;
    x[k] = base[k] - step;
    unflatten(probe, x);
    const double minus = evaluate_loss(probe, batch, problem).total;
    x[k] = base[k];
    const double fd = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(grad[k]), std::abs(fd), floor});
    if (denom > 0.0) worst = std::max(worst, std::abs(grad[k] - fd) / denom);
  }
  return worst;
}

}  // namespace pihnn
