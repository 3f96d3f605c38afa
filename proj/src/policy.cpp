#include "ttgoals/policy.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace ttgoals::policy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Arch arch) { return arch == Arch::lstm ? "lstm" : "mlp"; }

Arch parse_arch(const std::string& name) {
  if (name == "lstm") return Arch::lstm;
  if (name == "mlp") return Arch::mlp;
  throw ConfigError("unknown policy architecture '" + name + "'");
}

void PolicyConfig::validate() const {
  if (input_dim <= 0 || hidden <= 0 || joints <= 0) {
    throw ConfigError("policy: input_dim, hidden and joints must be positive");
  }
}

Normalizer Normalizer::identity(int input_dim, int joints) {
  return {VectorXd::Zero(input_dim), VectorXd::Ones(input_dim), VectorXd::Zero(joints),
          VectorXd::Ones(joints)};
}

namespace {

// Two-pass mean and population std over a set of column vectors.
void moments(const std::vector<const VectorXd*>& xs, double min_std, VectorXd& mean, VectorXd& std) {
  const Eigen::Index d = xs.front()->size();
  mean = VectorXd::Zero(d);
  for (const VectorXd* x : xs) mean += *x;
  mean /= static_cast<double>(xs.size());
  VectorXd var = VectorXd::Zero(d);
  for (const VectorXd* x : xs) var += (*x - mean).cwiseAbs2();
  var /= static_cast<double>(xs.size());
  std = var.cwiseSqrt().cwiseMax(min_std);
}

}  // namespace

Normalizer Normalizer::fit(const dataset::Cache& cache, double min_std) {
  std::vector<const VectorXd*> obs;
  std::vector<const VectorXd*> act;
  for (const auto& ep : cache.episodes()) {
    for (const auto& s : ep.steps) {
      obs.push_back(&s.obs);
      act.push_back(&s.act);
    }
  }
  if (obs.empty()) throw ContractViolation("normalizer: no steps to fit");
  Normalizer n;
  VectorXd obs_std;
  moments(obs, min_std, n.obs_mean, obs_std);
  n.obs_scale = obs_std.cwiseInverse();
  moments(act, min_std, n.act_mean, n.act_std);
  return n;
}

const std::vector<std::string>& PolicyParams::names() {
  static const std::vector<std::string> n = {"W0", "b0", "W1", "b1", "Wo", "bo"};
  return n;
}

Eigen::Index PolicyParams::size() const {
  Eigen::Index n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

bool PolicyParams::all_finite() const {
  for (const auto& t : tensors) {
    if (!t.allFinite()) return false;
  }
  return true;
}

namespace {

std::vector<std::pair<int, int>> shapes(const PolicyConfig& c) {
  const int H = c.hidden;
  const int D = c.input_dim;
  const int J = c.joints;
  if (c.arch == Arch::lstm) {
    return {{4 * H, D + H}, {4 * H, 1}, {4 * H, 2 * H}, {4 * H, 1}, {J, H}, {J, 1}};
  }
  return {{H, D}, {H, 1}, {H, H}, {H, 1}, {J, H}, {J, 1}};
}

}  // namespace

PolicyParams zero_params(const PolicyConfig& cfg) {
  cfg.validate();
  PolicyParams p;
  p.config = cfg;
  for (auto [r, c] : shapes(cfg)) p.tensors.push_back(MatrixXd::Zero(r, c));
  p.norm = Normalizer::identity(cfg.input_dim, cfg.joints);
  return p;
}

PolicyParams init_params(const PolicyConfig& cfg, Rng& rng) {
  PolicyParams p = zero_params(cfg);
  for (std::size_t k = 0; k < p.tensors.size(); k += 2) {
    MatrixXd& W = p.tensors[k];
    // Recurrent blocks see the layer input and the hidden state.
    const double fan_in = cfg.arch == Arch::lstm && k < 4 ? cfg.hidden : static_cast<double>(W.cols());
    const double a = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = uniform(rng, -a, a);
    }
  }
  if (cfg.arch == Arch::lstm) {
    const int H = cfg.hidden;
    p.tensors[1].middleRows(H, H).setOnes();
    p.tensors[3].middleRows(H, H).setOnes();
  }
  return p;
}

RecurrentState initial_state(const PolicyParams& params) {
  RecurrentState s;
  if (params.config.arch == Arch::lstm) {
    const int H = params.config.hidden;
    s.h.assign(2, VectorXd::Zero(H));
    s.c.assign(2, VectorXd::Zero(H));
  }
  return s;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per layer, per tick values kept for the backward pass.
struct LstmTick {
  MatrixXd in, h_prev, c_prev, i, f, g, o, c, tc, h;
};

struct Batch {
  int B = 0;
  int T = 0;
  std::vector<int> len;
  std::vector<MatrixXd> x;       // normalized inputs, D x B per tick
  std::vector<MatrixXd> target;  // normalized actions, J x B per tick
  Eigen::Index ticks = 0;
};

Batch pack(const PolicyParams& p, const std::vector<WindowSample>& batch, bool with_targets) {
  const PolicyConfig& c = p.config;
  Batch b;
  b.B = static_cast<int>(batch.size());
  for (const auto& w : batch) {
    if (w.obs.rows() != c.input_dim) throw ShapeError("policy: observation size mismatch");
    if (with_targets && w.act.rows() != c.joints) throw ShapeError("policy: action size mismatch");
    b.len.push_back(static_cast<int>(w.obs.cols()));
    b.T = std::max(b.T, b.len.back());
    b.ticks += w.obs.cols();
  }
  b.x.assign(b.T, MatrixXd::Zero(c.input_dim, b.B));
  if (with_targets) b.target.assign(b.T, MatrixXd::Zero(c.joints, b.B));
  const VectorXd inv_std = p.norm.act_std.cwiseInverse();
  for (int k = 0; k < b.B; ++k) {
    for (int t = 0; t < b.len[k]; ++t) {
      b.x[t].col(k) = (batch[k].obs.col(t) - p.norm.obs_mean).cwiseProduct(p.norm.obs_scale);
      if (with_targets) {
        b.target[t].col(k) = (batch[k].act.col(t) - p.norm.act_mean).cwiseProduct(inv_std);
      }
    }
  }
  return b;
}

void lstm_cell(const MatrixXd& W, const MatrixXd& bias, int H, LstmTick& s) {
  const Eigen::Index in = s.in.rows();
  MatrixXd z = W.leftCols(in) * s.in + W.rightCols(H) * s.h_prev;
  z.colwise() += bias.col(0);
  s.i = z.topRows(H).unaryExpr(&sigmoid);
  s.f = z.middleRows(H, H).unaryExpr(&sigmoid);
  s.g = z.middleRows(2 * H, H).array().tanh().matrix();
  s.o = z.bottomRows(H).unaryExpr(&sigmoid);
  s.c = s.f.cwiseProduct(s.c_prev) + s.i.cwiseProduct(s.g);
  s.tc = s.c.array().tanh().matrix();
  s.h = s.o.cwiseProduct(s.tc);
}

// Normalized outputs per tick, J x B. Fills `tape` when given.
std::vector<MatrixXd> run_lstm(const PolicyParams& p, const Batch& b,
                               std::vector<std::array<LstmTick, 2>>* tape) {
  const int H = p.config.hidden;
  const auto& T = p.tensors;
  std::vector<MatrixXd> y(b.T);
  MatrixXd h[2] = {MatrixXd::Zero(H, b.B), MatrixXd::Zero(H, b.B)};
  MatrixXd c[2] = {MatrixXd::Zero(H, b.B), MatrixXd::Zero(H, b.B)};
  if (tape) tape->resize(b.T);
  for (int t = 0; t < b.T; ++t) {
    std::array<LstmTick, 2> ticks;
    for (int l = 0; l < 2; ++l) {
      LstmTick& s = ticks[l];
      s.in = l == 0 ? b.x[t] : ticks[0].h;
      s.h_prev = h[l];
      s.c_prev = c[l];
      lstm_cell(T[2 * l], T[2 * l + 1], H, s);
      c[l] = s.c;
      h[l] = s.h;
    }
    y[t] = T[4] * h[1];
    y[t].colwise() += T[5].col(0);
    if (tape) (*tape)[t] = std::move(ticks);
  }
  return y;
}

struct MlpTape {
  MatrixXd x, a1, a2;
};

// All ticks of all windows side by side: column t * B + k.
MatrixXd run_mlp(const PolicyParams& p, const Batch& b, MlpTape& tape) {
  const auto& T = p.tensors;
  tape.x.resize(p.config.input_dim, static_cast<Eigen::Index>(b.T) * b.B);
  for (int t = 0; t < b.T; ++t) tape.x.middleCols(t * b.B, b.B) = b.x[t];
  tape.a1 = T[0] * tape.x;
  tape.a1.colwise() += T[1].col(0);
  tape.a1 = tape.a1.array().tanh().matrix();
  tape.a2 = T[2] * tape.a1;
  tape.a2.colwise() += T[3].col(0);
  tape.a2 = tape.a2.array().tanh().matrix();
  MatrixXd y = T[4] * tape.a2;
  y.colwise() += T[5].col(0);
  return y;
}

MatrixXd mask_of(const Batch& b, int t, int rows) {
  MatrixXd m = MatrixXd::Zero(rows, b.B);
  for (int k = 0; k < b.B; ++k) {
    if (t < b.len[k]) m.col(k).setOnes();
  }
  return m;
}

Gradient zeros_like(const PolicyParams& p) {
  Gradient g;
  for (const auto& t : p.tensors) g.push_back(MatrixXd::Zero(t.rows(), t.cols()));
  return g;
}

double lstm_loss_grad(const PolicyParams& p, const Batch& b, Gradient* grad) {
  const int H = p.config.hidden;
  const int J = p.config.joints;
  const auto& W = p.tensors;
  std::vector<std::array<LstmTick, 2>> tape;
  const std::vector<MatrixXd> y = run_lstm(p, b, grad ? &tape : nullptr);
  const double norm = 1.0 / (static_cast<double>(b.ticks) * J);
  double total = 0.0;
  std::vector<MatrixXd> dy(b.T);
  for (int t = 0; t < b.T; ++t) {
    const MatrixXd r = (y[t] - b.target[t]).cwiseProduct(mask_of(b, t, J));
    total += r.squaredNorm();
    dy[t] = 2.0 * norm * r;
  }
  if (!grad) return total * norm;

  Gradient& g = *grad;
  g = zeros_like(p);
  MatrixXd dh_next[2] = {MatrixXd::Zero(H, b.B), MatrixXd::Zero(H, b.B)};
  MatrixXd dc_next[2] = {MatrixXd::Zero(H, b.B), MatrixXd::Zero(H, b.B)};
  for (int t = b.T - 1; t >= 0; --t) {
    const auto& ticks = tape[t];
    g[4].noalias() += dy[t] * ticks[1].h.transpose();
    g[5].col(0) += dy[t].rowwise().sum();
    MatrixXd dh = W[4].transpose() * dy[t] + dh_next[1];
    for (int l = 1; l >= 0; --l) {
      const LstmTick& s = ticks[l];
      const auto ones = MatrixXd::Ones(H, b.B).array();
      const MatrixXd d_o = dh.cwiseProduct(s.tc);
      const MatrixXd dc =
          (dh.array() * s.o.array() * (ones - s.tc.array().square())).matrix() + dc_next[l];
      MatrixXd dz(4 * H, b.B);
      dz.topRows(H) = (dc.array() * s.g.array() * s.i.array() * (ones - s.i.array())).matrix();
      dz.middleRows(H, H) =
          (dc.array() * s.c_prev.array() * s.f.array() * (ones - s.f.array())).matrix();
      dz.middleRows(2 * H, H) = (dc.array() * s.i.array() * (ones - s.g.array().square())).matrix();
      dz.bottomRows(H) = (d_o.array() * s.o.array() * (ones - s.o.array())).matrix();
      dc_next[l] = dc.cwiseProduct(s.f);
      const Eigen::Index in = s.in.rows();
      g[2 * l].leftCols(in).noalias() += dz * s.in.transpose();
      g[2 * l].rightCols(H).noalias() += dz * s.h_prev.transpose();
      g[2 * l + 1].col(0) += dz.rowwise().sum();
      const MatrixXd dx = W[2 * l].transpose() * dz;
      dh_next[l] = dx.bottomRows(H);
      if (l == 1) dh = dx.topRows(H) + dh_next[0];
    }
  }
  return total * norm;
}

double mlp_loss_grad(const PolicyParams& p, const Batch& b, Gradient* grad) {
  const int J = p.config.joints;
  const auto& W = p.tensors;
  MlpTape tape;
  const MatrixXd y = run_mlp(p, b, tape);
  MatrixXd r(J, y.cols());
  for (int t = 0; t < b.T; ++t) {
    r.middleCols(t * b.B, b.B) =
        (y.middleCols(t * b.B, b.B) - b.target[t]).cwiseProduct(mask_of(b, t, J));
  }
  const double norm = 1.0 / (static_cast<double>(b.ticks) * J);
  const double value = r.squaredNorm() * norm;
  if (!grad) return value;

  Gradient& g = *grad;
  g = zeros_like(p);
  const MatrixXd dy = 2.0 * norm * r;
  g[4] = dy * tape.a2.transpose();
  g[5].col(0) = dy.rowwise().sum();
  const MatrixXd dz2 = (W[4].transpose() * dy).cwiseProduct((1.0 - tape.a2.array().square()).matrix());
  g[2] = dz2 * tape.a1.transpose();
  g[3].col(0) = dz2.rowwise().sum();
  const MatrixXd dz1 = (W[2].transpose() * dz2).cwiseProduct((1.0 - tape.a1.array().square()).matrix());
  g[0] = dz1 * tape.x.transpose();
  g[1].col(0) = dz1.rowwise().sum();
  return value;
}

double evaluate(const PolicyParams& p, const std::vector<WindowSample>& batch, Gradient* grad) {
  if (batch.empty()) throw ContractViolation("policy loss: empty batch");
  const Batch b = pack(p, batch, true);
  return p.config.arch == Arch::lstm ? lstm_loss_grad(p, b, grad) : mlp_loss_grad(p, b, grad);
}

}  // namespace

MatrixXd forward(const PolicyParams& params, const MatrixXd& obs_window) {
  std::vector<WindowSample> one(1);
  one[0].obs = obs_window;
  const Batch b = pack(params, one, false);
  MatrixXd out(params.config.joints, b.T);
  if (params.config.arch == Arch::lstm) {
    const std::vector<MatrixXd> y = run_lstm(params, b, nullptr);
    for (int t = 0; t < b.T; ++t) out.col(t) = y[t].col(0);
  } else {
    MlpTape tape;
    out = run_mlp(params, b, tape);
  }
  for (int t = 0; t < b.T; ++t) {
    out.col(t) = params.norm.act_mean + params.norm.act_std.cwiseProduct(out.col(t));
  }
  return out;
}

VectorXd act(const PolicyParams& params, RecurrentState& state, const VectorXd& obs) {
  const PolicyConfig& c = params.config;
  if (obs.size() != c.input_dim) throw ShapeError("policy act: observation size mismatch");
  const auto& W = params.tensors;
  const VectorXd x = (obs - params.norm.obs_mean).cwiseProduct(params.norm.obs_scale);
  VectorXd y;
  if (c.arch == Arch::lstm) {
    if (state.h.size() != 2) state = initial_state(params);
    const int H = c.hidden;
    VectorXd in = x;
    for (int l = 0; l < 2; ++l) {
      LstmTick s;
      s.in = in;
      s.h_prev = state.h[l];
      s.c_prev = state.c[l];
      lstm_cell(W[2 * l], W[2 * l + 1], H, s);
      state.c[l] = s.c;
      state.h[l] = s.h;
      in = state.h[l];
    }
    y = W[4] * state.h[1] + W[5].col(0);
  } else {
    const VectorXd a1 = (W[0] * x + W[1].col(0)).array().tanh().matrix();
    const VectorXd a2 = (W[2] * a1 + W[3].col(0)).array().tanh().matrix();
    y = W[4] * a2 + W[5].col(0);
  }
  return params.norm.act_mean + params.norm.act_std.cwiseProduct(y);
}

double loss(const PolicyParams& params, const std::vector<WindowSample>& batch) {
  return evaluate(params, batch, nullptr);
}

double loss_and_grad(const PolicyParams& params, const std::vector<WindowSample>& batch,
                     Gradient& g) {
  return evaluate(params, batch, &g);
}

Gradient grad(const PolicyParams& params, const std::vector<WindowSample>& batch) {
  Gradient g;
  evaluate(params, batch, &g);
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (window < 1) throw ConfigError("train: window length k must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (hidden < 1) throw ConfigError("train: hidden size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: moment coefficients must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip norm must be positive");
}

AdamState AdamState::zeros_like(const PolicyParams& params) {
  AdamState s;
  s.m = policy::zeros_like(params);
  s.v = policy::zeros_like(params);
  return s;
}

double global_norm(const Gradient& g) {
  double sq = 0.0;
  for (const auto& t : g) sq += t.squaredNorm();
  return std::sqrt(sq);
}

double train_step(PolicyParams& params, AdamState& opt, const std::vector<WindowSample>& batch,
                  const TrainConfig& cfg) {
  Gradient g;
  const double value = loss_and_grad(params, batch, g);
  const double gn = global_norm(g);
  if (!std::isfinite(value) || !std::isfinite(gn)) {
    std::string ids;
    for (const auto& w : batch) ids += (ids.empty() ? "" : ",") + std::to_string(w.episode_id);
    throw TrainingError("non-finite loss; batch episodes: " + ids);
  }
  if (gn > cfg.clip_norm) {
    for (auto& t : g) t *= cfg.clip_norm / gn;
  }
  if (opt.m.size() != g.size()) opt = AdamState::zeros_like(params);
  ++opt.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  for (std::size_t k = 0; k < g.size(); ++k) {
    opt.m[k] = cfg.beta1 * opt.m[k] + (1.0 - cfg.beta1) * g[k];
    opt.v[k] = cfg.beta2 * opt.v[k] + (1.0 - cfg.beta2) * g[k].cwiseAbs2();
    params.tensors[k].array() -= cfg.learning_rate * (opt.m[k].array() / c1) /
                                 ((opt.v[k].array() / c2).sqrt() + cfg.epsilon);
  }
  return value;
}

Ensemble make_ensemble(const PolicyConfig& cfg, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("ensemble: size must be >= 1");
  Ensemble e;
  for (int m = 0; m < n; ++m) {
    Rng rng(stream_seed(seed, 0, static_cast<std::uint64_t>(m)));
    e.models.push_back(init_params(cfg, rng));
    e.optimizers.push_back(AdamState::zeros_like(e.models.back()));
  }
  return e;
}

std::vector<int> rollout_assignment(int n_models, int n_rollouts) {
  if (n_models < 1) throw ConfigError("ensemble: size must be >= 1");
  std::vector<int> out(std::max(0, n_rollouts));
  for (int r = 0; r < n_rollouts; ++r) out[r] = r % n_models;
  return out;
}

namespace {

using nlohmann::json;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_checkpoint(const std::vector<PolicyParams>& models, env::ObsLayout layout,
                     const std::filesystem::path& path) {
  json jm = json::array();
  for (const PolicyParams& p : models) {
    json tensors = json::array();
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
      const MatrixXd& t = p.tensors[k];
      std::vector<double> data;
      data.reserve(t.size());
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.cols(); ++j) data.push_back(t(i, j));
      }
      tensors.push_back({{"name", PolicyParams::names()[k]},
                         {"shape", {t.rows(), t.cols()}},
                         {"data", std::move(data)}});
    }
    jm.push_back({{"arch", to_string(p.config.arch)},
                  {"input_dim", p.config.input_dim},
                  {"hidden", p.config.hidden},
                  {"joints", p.config.joints},
                  {"normalizer",
                   {{"obs_mean", vec_json(p.norm.obs_mean)},
                    {"obs_scale", vec_json(p.norm.obs_scale)},
                    {"act_mean", vec_json(p.norm.act_mean)},
                    {"act_std", vec_json(p.norm.act_std)}}},
                  {"tensors", std::move(tensors)}});
  }
  const json doc = {{"format", "ttgoals-policy"},
                    {"version", 1},
                    {"obs_layout", env::to_string(layout)},
                    {"models", std::move(jm)}};
  std::ofstream out(path);
  if (!out) throw Error("save_checkpoint: cannot open " + path.string());
  out << doc.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_checkpoint: cannot open " + path.string());
  Checkpoint ck;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "ttgoals-policy" || doc.at("version") != 1) {
      throw std::invalid_argument("not a version 1 policy checkpoint");
    }
    ck.layout = env::parse_layout(doc.at("obs_layout").get<std::string>());
    for (const json& jm : doc.at("models")) {
      PolicyConfig cfg;
      cfg.arch = parse_arch(jm.at("arch").get<std::string>());
      cfg.input_dim = jm.at("input_dim").get<int>();
      cfg.hidden = jm.at("hidden").get<int>();
      cfg.joints = jm.at("joints").get<int>();
      PolicyParams p = zero_params(cfg);
      const json& tensors = jm.at("tensors");
      if (tensors.size() != p.tensors.size()) throw std::invalid_argument("tensor count mismatch");
      for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        MatrixXd& t = p.tensors[k];
        const auto shape = tensors[k].at("shape").get<std::vector<Eigen::Index>>();
        const auto data = tensors[k].at("data").get<std::vector<double>>();
        if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
            static_cast<Eigen::Index>(data.size()) != t.size()) {
          throw std::invalid_argument("tensor " + PolicyParams::names()[k] + " has the wrong shape");
        }
        for (Eigen::Index i = 0, n = 0; i < t.rows(); ++i) {
          for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = data[n++];
        }
      }
      const json& jn = jm.at("normalizer");
      p.norm = {vec_from(jn.at("obs_mean")), vec_from(jn.at("obs_scale")),
                vec_from(jn.at("act_mean")), vec_from(jn.at("act_std"))};
      if (p.norm.obs_mean.size() != cfg.input_dim || p.norm.obs_scale.size() != cfg.input_dim ||
          p.norm.act_mean.size() != cfg.joints || p.norm.act_std.size() != cfg.joints) {
        throw std::invalid_argument("normalizer dimensions mismatch");
      }
      ck.models.push_back(std::move(p));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error("load_checkpoint: " + path.string() + ": " + e.what());
  }
  if (ck.models.empty()) throw Error("load_checkpoint: no models in " + path.string());
  return ck;
}

}  // namespace ttgoals::policy
