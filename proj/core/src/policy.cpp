#include "mtil/policy.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mtil {

namespace {

Eigen::MatrixXd init_matrix(int rows, int cols, SplitRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

Eigen::VectorXd init_bias(int rows, int fan_in, SplitRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Eigen::VectorXd b(rows);
  for (int r = 0; r < rows; ++r) b[r] = rng.uniform(-bound, bound);
  return b;
}

}  // namespace

ReprParams make_repr(int input_dim, const std::vector<int>& hidden, int output_dim,
                     double c_phi, SplitRng& rng) {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("make_repr: dimensions must be positive");
  if (!(c_phi > 0.0)) throw std::invalid_argument("make_repr: c_phi must be positive");
  ReprParams repr;
  repr.c_phi = c_phi;
  int in = input_dim;
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("make_repr: hidden sizes must be positive");
    repr.weights.push_back(init_matrix(h, in, rng));
    repr.biases.push_back(init_bias(h, in, rng));
    in = h;
  }
  repr.weights.push_back(init_matrix(output_dim, in, rng));
  repr.biases.push_back(init_bias(output_dim, in, rng));
  return repr;
}

HeadParams make_head(int num_actions, int repr_dim, double c_f, SplitRng& rng) {
  if (num_actions < 1 || repr_dim < 1)
    throw std::invalid_argument("make_head: dimensions must be positive");
  if (!(c_f > 0.0)) throw std::invalid_argument("make_head: c_f must be positive");
  HeadParams head;
  head.c_f = c_f;
  head.weight = init_matrix(num_actions, repr_dim, rng);
  return head;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

double log_softmax_loss(const Eigen::VectorXd& logits, int action) {
  if (action < 0 || action >= logits.size())
    throw std::invalid_argument("log_softmax_loss: action out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits[action];
}

void repr_forward_cached(const ReprParams& repr, const Eigen::MatrixXd& obs,
                         ReprForwardCache& cache) {
  if (obs.cols() != repr.input_dim())
    throw std::invalid_argument("repr_forward: observation dimension mismatch");
  if (!obs.allFinite()) throw std::invalid_argument("repr_forward: non-finite input");

  const std::size_t layers = repr.weights.size();
  cache.inputs.assign(layers, Eigen::MatrixXd());
  cache.inputs[0] = obs;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    cache.inputs[l + 1] =
        ((cache.inputs[l] * repr.weights[l].transpose()).rowwise() +
         repr.biases[l].transpose())
            .array()
            .tanh();
  }
  cache.pre_projection =
      (cache.inputs[layers - 1] * repr.weights[layers - 1].transpose()).rowwise() +
      repr.biases[layers - 1].transpose();
  cache.pre_projection_norm = cache.pre_projection.rowwise().norm();

  cache.phi = cache.pre_projection * repr.c_phi;
  for (int i = 0; i < cache.phi.rows(); ++i) {
    const double n = cache.pre_projection_norm[i];
    if (n > 1.0) cache.phi.row(i) /= n;
  }
}

Eigen::MatrixXd repr_forward(const ReprParams& repr, const Eigen::MatrixXd& obs) {
  ReprForwardCache cache;
  repr_forward_cached(repr, obs, cache);
  return std::move(cache.phi);
}

ReprGrads zero_grads_like(const ReprParams& repr) {
  ReprGrads grads;
  grads.weights.reserve(repr.weights.size());
  grads.biases.reserve(repr.biases.size());
  for (std::size_t l = 0; l < repr.weights.size(); ++l) {
    grads.weights.push_back(Eigen::MatrixXd::Zero(repr.weights[l].rows(), repr.weights[l].cols()));
    grads.biases.push_back(Eigen::VectorXd::Zero(repr.biases[l].size()));
  }
  return grads;
}

void repr_backward(const ReprParams& repr, const ReprForwardCache& cache,
                   const Eigen::MatrixXd& dphi, ReprGrads& grads) {
  const std::size_t layers = repr.weights.size();

  // Through the radial projection. For ||u|| <= 1 the map is c_phi * u;
  // beyond the ball it is c_phi * u / ||u|| with Jacobian
  // (c_phi/||u||) (I - uu^T/||u||^2).
  Eigen::MatrixXd delta = dphi * repr.c_phi;
  for (int i = 0; i < delta.rows(); ++i) {
    const double n = cache.pre_projection_norm[i];
    if (n > 1.0) {
      const auto u = cache.pre_projection.row(i);
      const double coef = delta.row(i).dot(u) / (n * n);
      delta.row(i) -= coef * u;
      delta.row(i) /= n;
    }
  }

  // Final linear layer.
  grads.weights[layers - 1] += delta.transpose() * cache.inputs[layers - 1];
  grads.biases[layers - 1] += delta.colwise().sum().transpose();
  if (layers == 1) return;
  Eigen::MatrixXd dhidden = delta * repr.weights[layers - 1];

  // Hidden tanh layers, walking backwards.
  for (std::size_t l = layers - 1; l-- > 0;) {
    const Eigen::MatrixXd& activ = cache.inputs[l + 1];
    Eigen::MatrixXd dpre = dhidden.array() * (1.0 - activ.array().square());
    grads.weights[l] += dpre.transpose() * cache.inputs[l];
    grads.biases[l] += dpre.colwise().sum().transpose();
    if (l > 0) dhidden = dpre * repr.weights[l];
  }
}

ForwardResult forward(const PolicyParams& policy, const Eigen::VectorXd& obs) {
  const Eigen::MatrixXd phi = repr_forward(policy.repr, obs.transpose());
  ForwardResult out;
  out.logits = policy.head.weight * phi.row(0).transpose();
  out.probs = softmax(out.logits);
  return out;
}

Eigen::MatrixXd policy_logits(const PolicyParams& policy, const Eigen::MatrixXd& obs) {
  return repr_forward(policy.repr, obs) * policy.head.weight.transpose();
}

MultitaskGrads multitask_loss_and_grads(const ReprParams& repr,
                                        const std::vector<HeadParams>& heads,
                                        const Eigen::MatrixXd& obs,
                                        const std::vector<int>& actions,
                                        const std::vector<int>& head_of,
                                        std::vector<double>* per_sample_loss) {
  const int n = static_cast<int>(obs.rows());
  if (n == 0) throw std::invalid_argument("multitask_loss_and_grads: empty batch");
  if (static_cast<int>(actions.size()) != n || static_cast<int>(head_of.size()) != n)
    throw std::invalid_argument("multitask_loss_and_grads: batch length mismatch");
  for (int i = 0; i < n; ++i) {
    if (head_of[i] < 0 || head_of[i] >= static_cast<int>(heads.size()))
      throw std::invalid_argument("multitask_loss_and_grads: head index out of range");
    if (actions[i] < 0 || actions[i] >= heads[head_of[i]].weight.rows())
      throw std::invalid_argument("multitask_loss_and_grads: action out of range");
  }

  ReprForwardCache cache;
  repr_forward_cached(repr, obs, cache);

  MultitaskGrads out;
  out.repr_grads = zero_grads_like(repr);
  out.head_grads.reserve(heads.size());
  for (const auto& h : heads)
    out.head_grads.push_back(Eigen::MatrixXd::Zero(h.weight.rows(), h.weight.cols()));
  if (per_sample_loss) per_sample_loss->assign(n, 0.0);

  std::vector<std::vector<int>> rows_of_head(heads.size());
  for (int i = 0; i < n; ++i) rows_of_head[head_of[i]].push_back(i);

  Eigen::MatrixXd dphi = Eigen::MatrixXd::Zero(n, repr.output_dim());
  const double inv_n = 1.0 / n;
  double total = 0.0;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto& rows = rows_of_head[h];
    if (rows.empty()) continue;
    const Eigen::MatrixXd& w = heads[h].weight;
    const int nh = static_cast<int>(rows.size());

    Eigen::MatrixXd phi_h(nh, cache.phi.cols());
    for (int r = 0; r < nh; ++r) phi_h.row(r) = cache.phi.row(rows[r]);

    Eigen::MatrixXd logits = phi_h * w.transpose();
    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    Eigen::MatrixXd p = (logits.colwise() - row_max).array().exp();
    const Eigen::VectorXd z = p.rowwise().sum();
    p.array().colwise() /= z.array();  // softmax rows
    for (int r = 0; r < nh; ++r) {
      const int a = actions[rows[r]];
      const double loss_r = row_max[r] + std::log(z[r]) - logits(r, a);
      total += loss_r;
      if (per_sample_loss) (*per_sample_loss)[rows[r]] = loss_r;
      p(r, a) -= 1.0;
    }
    p *= inv_n;
    out.head_grads[h].noalias() += p.transpose() * phi_h;
    const Eigen::MatrixXd dphi_h = p * w;
    for (int r = 0; r < nh; ++r) dphi.row(rows[r]) = dphi_h.row(r);
  }
  out.loss = total * inv_n;
  repr_backward(repr, cache, dphi, out.repr_grads);
  return out;
}

LossAndGrads loss_and_grads(const PolicyParams& policy, const Eigen::MatrixXd& obs,
                            const std::vector<int>& actions) {
  std::vector<int> head_of(static_cast<std::size_t>(obs.rows()), 0);
  MultitaskGrads joint = multitask_loss_and_grads(policy.repr, {policy.head}, obs, actions,
                                                  head_of);
  LossAndGrads out;
  out.loss = joint.loss;
  out.repr_grads = std::move(joint.repr_grads);
  out.head_grad = std::move(joint.head_grads[0]);
  return out;
}

void project_head(HeadParams& head) {
  const double norm = head.weight.norm();
  if (norm > head.c_f) head.weight *= head.c_f / norm;
}

PolicyParams project_constraints(PolicyParams policy) {
  project_head(policy.head);
  return policy;
}

namespace {

void write_scalar(std::ostream& out, const std::string& name, double v) {
  std::ostringstream line;
  line << std::hexfloat << v;
  out << "scalar " << name << ' ' << line.str() << '\n';
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "tensor " << name << " 2 " << m.rows() << ' ' << m.cols() << '\n';
  std::ostringstream body;
  body << std::hexfloat;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) body << ' ';
      body << m(r, c);
    }
    body << '\n';
  }
  out << body.str();
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::VectorXd& v) {
  out << "tensor " << name << " 1 " << v.size() << '\n';
  std::ostringstream body;
  body << std::hexfloat;
  for (int i = 0; i < v.size(); ++i) {
    if (i) body << ' ';
    body << v[i];
  }
  body << '\n';
  out << body.str();
}

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str()) throw std::invalid_argument("params: bad numeric token " + token);
  return v;
}

struct TensorReader {
  std::istream& in;

  std::string expect(const std::string& kind, const std::string& name) {
    std::string k, n;
    if (!(in >> k >> n)) throw std::invalid_argument("params: truncated stream");
    if (k != kind || n != name)
      throw std::invalid_argument("params: expected " + kind + " " + name + ", got " + k + " " + n);
    return n;
  }

  double read_scalar(const std::string& name) {
    expect("scalar", name);
    std::string tok;
    in >> tok;
    return parse_double(tok);
  }

  Eigen::MatrixXd read_matrix(const std::string& name) {
    expect("tensor", name);
    int ndim = 0;
    in >> ndim;
    if (ndim != 2) throw std::invalid_argument("params: expected rank-2 tensor " + name);
    Eigen::Index rows = 0, cols = 0;
    in >> rows >> cols;
    Eigen::MatrixXd m(rows, cols);
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        in >> tok;
        m(r, c) = parse_double(tok);
      }
    return m;
  }

  Eigen::VectorXd read_vector(const std::string& name) {
    expect("tensor", name);
    int ndim = 0;
    in >> ndim;
    if (ndim != 1) throw std::invalid_argument("params: expected rank-1 tensor " + name);
    Eigen::Index size = 0;
    in >> size;
    Eigen::VectorXd v(size);
    std::string tok;
    for (Eigen::Index i = 0; i < size; ++i) {
      in >> tok;
      v[i] = parse_double(tok);
    }
    return v;
  }
};

}  // namespace

void save_repr(std::ostream& out, const ReprParams& repr) {
  out << "mtil-params 1\n";
  out << "repr " << repr.weights.size() << '\n';
  write_scalar(out, "repr.c_phi", repr.c_phi);
  for (std::size_t l = 0; l < repr.weights.size(); ++l) {
    write_tensor(out, "repr.w" + std::to_string(l), repr.weights[l]);
    write_tensor(out, "repr.b" + std::to_string(l), repr.biases[l]);
  }
}

ReprParams load_repr(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mtil-params" || version != 1)
    throw std::invalid_argument("params: unrecognized container header");
  std::string section;
  std::size_t layers = 0;
  in >> section >> layers;
  if (section != "repr") throw std::invalid_argument("params: expected repr section");
  TensorReader reader{in};
  ReprParams repr;
  repr.c_phi = reader.read_scalar("repr.c_phi");
  for (std::size_t l = 0; l < layers; ++l) {
    repr.weights.push_back(reader.read_matrix("repr.w" + std::to_string(l)));
    repr.biases.push_back(reader.read_vector("repr.b" + std::to_string(l)));
  }
  if (repr.weights.empty()) throw std::invalid_argument("params: repr has no layers");
  return repr;
}

void save_policy(std::ostream& out, const PolicyParams& policy) {
  save_repr(out, policy.repr);
  out << "head\n";
  write_scalar(out, "head.c_f", policy.head.c_f);
  write_tensor(out, "head.w", policy.head.weight);
}

PolicyParams load_policy(std::istream& in) {
  PolicyParams policy;
  policy.repr = load_repr(in);
  std::string section;
  in >> section;
  if (section != "head") throw std::invalid_argument("params: expected head section");
  TensorReader reader{in};
  policy.head.c_f = reader.read_scalar("head.c_f");
  policy.head.weight = reader.read_matrix("head.w");
  return policy;
}

std::string repr_bytes(const ReprParams& repr) {
  std::ostringstream out;
  save_repr(out, repr);
  return out.str();
}

}  // namespace mtil
