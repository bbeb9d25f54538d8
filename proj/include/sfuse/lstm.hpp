#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfuse/csv.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/types.hpp"

namespace sfuse {

// Pose sequences enter the network as 7-component deltas between consecutive
// poses: translation (3) and rotation quaternion (w,x,y,z), canonical sign.
inline constexpr int kPoseEncodingDim = 7;

inline VecX encode_step(const Pose6D& a, const Pose6D& b) {
  const PoseDelta d = between(a, b);
  VecX e(kPoseEncodingDim);
  e.head<3>() = d.translation;
  e[3] = d.rotation.w();
  e[4] = d.rotation.x();
  e[5] = d.rotation.y();
  e[6] = d.rotation.z();
  return e;
}

inline PoseDelta decode_step(const VecX& e) {
  if (e.size() != kPoseEncodingDim)
    throw std::invalid_argument("decode_step: wrong encoding size");
  Quat q(e[3], e[4], e[5], e[6]);
  if (!(q.norm() > 1e-12)) q = Quat::Identity();  // untrained output guard
  return PoseDelta(Vec3(e.head<3>()), q);
}

struct LstmParameters {
  int hidden_size = 0;
  int input_size = 0;  // cell input width after the input projection
  MatX W_f, W_i, W_g, W_o;  // hidden x (input + hidden)
  VecX b_f, b_i, b_g, b_o;
  MatX W_in;   // input x encoding
  VecX b_in;
  MatX W_out;  // encoding x hidden
  VecX b_out;
  VecX input_mean, input_scale;  // encoding normalization, learned from data

  static LstmParameters zeros(int hidden, int input) {
    LstmParameters p;
    p.hidden_size = hidden;
    p.input_size = input;
    const int cols = input + hidden;
    p.W_f = MatX::Zero(hidden, cols);
    p.W_i = MatX::Zero(hidden, cols);
    p.W_g = MatX::Zero(hidden, cols);
    p.W_o = MatX::Zero(hidden, cols);
    p.b_f = VecX::Zero(hidden);
    p.b_i = VecX::Zero(hidden);
    p.b_g = VecX::Zero(hidden);
    p.b_o = VecX::Zero(hidden);
    p.W_in = MatX::Zero(input, kPoseEncodingDim);
    p.b_in = VecX::Zero(input);
    p.W_out = MatX::Zero(kPoseEncodingDim, hidden);
    p.b_out = VecX::Zero(kPoseEncodingDim);
    p.input_mean = VecX::Zero(kPoseEncodingDim);
    p.input_scale = VecX::Ones(kPoseEncodingDim);
    return p;
  }

  static LstmParameters random_init(int hidden, int input, RngStream& rng) {
    LstmParameters p = zeros(hidden, input);
    const auto fill = [&rng](MatX& m) {
      const double r = 1.0 / std::sqrt(static_cast<double>(m.cols()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-r, r);
    };
    fill(p.W_f);
    fill(p.W_i);
    fill(p.W_g);
    fill(p.W_o);
    fill(p.W_in);
    fill(p.W_out);
    p.b_f.setOnes();  // open forget gates at the start
    return p;
  }

  void check_consistent() const {
    const int cols = input_size + hidden_size;
    if (hidden_size <= 0 || input_size <= 0 || W_f.rows() != hidden_size ||
        W_f.cols() != cols || W_i.rows() != hidden_size || W_i.cols() != cols ||
        W_g.rows() != hidden_size || W_g.cols() != cols || W_o.rows() != hidden_size ||
        W_o.cols() != cols || b_f.size() != hidden_size || b_i.size() != hidden_size ||
        b_g.size() != hidden_size || b_o.size() != hidden_size ||
        W_in.rows() != input_size || W_in.cols() != kPoseEncodingDim ||
        b_in.size() != input_size || W_out.rows() != kPoseEncodingDim ||
        W_out.cols() != hidden_size || b_out.size() != kPoseEncodingDim ||
        input_mean.size() != kPoseEncodingDim || input_scale.size() != kPoseEncodingDim)
      throw std::invalid_argument("LstmParameters: inconsistent dimensions");
    const auto finite = [](const MatX& m) { return m.allFinite(); };
    if (!finite(W_f) || !finite(W_i) || !finite(W_g) || !finite(W_o) || !finite(W_in) ||
        !finite(W_out) || !b_f.allFinite() || !b_i.allFinite() || !b_g.allFinite() ||
        !b_o.allFinite() || !b_in.allFinite() || !b_out.allFinite() ||
        !input_mean.allFinite() || !input_scale.allFinite())
      throw std::invalid_argument("LstmParameters: non-finite entries");
  }

  // in-place axpy over every tensor, used by SGD and gradient clipping
  void axpy(double a, const LstmParameters& g) {
    W_f += a * g.W_f;
    W_i += a * g.W_i;
    W_g += a * g.W_g;
    W_o += a * g.W_o;
    b_f += a * g.b_f;
    b_i += a * g.b_i;
    b_g += a * g.b_g;
    b_o += a * g.b_o;
    W_in += a * g.W_in;
    b_in += a * g.b_in;
    W_out += a * g.W_out;
    b_out += a * g.b_out;
  }

  double grad_norm() const {
    double s = W_f.squaredNorm() + W_i.squaredNorm() + W_g.squaredNorm() +
               W_o.squaredNorm() + b_f.squaredNorm() + b_i.squaredNorm() +
               b_g.squaredNorm() + b_o.squaredNorm() + W_in.squaredNorm() +
               b_in.squaredNorm() + W_out.squaredNorm() + b_out.squaredNorm();
    return std::sqrt(s);
  }
};

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
} // namespace detail

struct LstmCellStep {
  VecX x;  // cell input (post input-projection)
  VecX z;  // [x; h_prev]
  VecX f, i, g, o;
  VecX c_prev, c, tanh_c, h;
};

inline LstmCellStep lstm_cell_forward(const VecX& x, const VecX& h_prev, const VecX& c_prev,
                                      const LstmParameters& p) {
  if (x.size() != p.input_size || h_prev.size() != p.hidden_size ||
      c_prev.size() != p.hidden_size)
    throw std::invalid_argument("lstm_cell_forward: dimension mismatch");
  LstmCellStep s;
  s.x = x;
  s.z = VecX(p.input_size + p.hidden_size);
  s.z.head(p.input_size) = x;
  s.z.tail(p.hidden_size) = h_prev;
  s.c_prev = c_prev;
  s.f = ((p.W_f * s.z + p.b_f).unaryExpr([](double v) { return detail::sigmoid(v); })).eval();
  s.i = ((p.W_i * s.z + p.b_i).unaryExpr([](double v) { return detail::sigmoid(v); })).eval();
  s.g = ((p.W_g * s.z + p.b_g).array().tanh()).matrix().eval();
  s.o = ((p.W_o * s.z + p.b_o).unaryExpr([](double v) { return detail::sigmoid(v); })).eval();
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tanh_c.array()).matrix();
  return s;
}

struct LstmForward {
  std::vector<LstmCellStep> steps;
  std::vector<VecX> enc_norm;  // normalized encodings fed to the input projection
  VecX h_final;                // after optional dropout mask
  VecX output;                 // predicted next-step encoding (denormalized... raw target space)
};

/// Run the cell over a sequence of raw pose encodings from zero initial state
/// and project the final hidden state to the predicted next encoding. The
/// optional dropout mask (entries 0 or 1/keep_prob) applies to the
/// hidden-to-output projection input, training only.
inline LstmForward lstm_sequence_forward_cached(const std::vector<VecX>& seq,
                                                const LstmParameters& p,
                                                const VecX* dropout_mask = nullptr) {
  if (seq.empty()) throw std::invalid_argument("lstm_sequence_forward: empty sequence");
  p.check_consistent();
  LstmForward fw;
  fw.steps.reserve(seq.size());
  fw.enc_norm.reserve(seq.size());
  VecX h = VecX::Zero(p.hidden_size);
  VecX c = VecX::Zero(p.hidden_size);
  for (const VecX& e : seq) {
    if (e.size() != kPoseEncodingDim)
      throw std::invalid_argument("lstm_sequence_forward: bad encoding size");
    const VecX en = ((e - p.input_mean).array() / p.input_scale.array()).matrix();
    fw.enc_norm.push_back(en);
    const VecX x = p.W_in * en + p.b_in;
    LstmCellStep s = lstm_cell_forward(x, h, c, p);
    h = s.h;
    c = s.c;
    fw.steps.push_back(std::move(s));
  }
  fw.h_final = dropout_mask ? VecX((h.array() * dropout_mask->array()).matrix()) : h;
  fw.output = p.W_out * fw.h_final + p.b_out;
  return fw;
}

inline VecX lstm_sequence_forward(const std::vector<VecX>& seq, const LstmParameters& p) {
  return lstm_sequence_forward_cached(seq, p).output;
}

/// Mean-squared-error loss over encoding components.
inline double lstm_loss(const VecX& output, const VecX& target) {
  return (output - target).squaredNorm() / static_cast<double>(kPoseEncodingDim);
}

/// Exact gradients of lstm_loss with respect to every parameter, by
/// backpropagation through the unrolled sequence.
inline LstmParameters lstm_backward(const std::vector<VecX>& seq, const VecX& target,
                                    const LstmParameters& p, double* loss_out = nullptr,
                                    const VecX* dropout_mask = nullptr) {
  const LstmForward fw = lstm_sequence_forward_cached(seq, p, dropout_mask);
  if (loss_out) *loss_out = lstm_loss(fw.output, target);

  LstmParameters g = LstmParameters::zeros(p.hidden_size, p.input_size);
  const VecX dout = 2.0 * (fw.output - target) / static_cast<double>(kPoseEncodingDim);
  g.W_out = dout * fw.h_final.transpose();
  g.b_out = dout;
  VecX dh = p.W_out.transpose() * dout;
  if (dropout_mask) dh = (dh.array() * dropout_mask->array()).matrix();
  VecX dc = VecX::Zero(p.hidden_size);

  for (int t = static_cast<int>(fw.steps.size()) - 1; t >= 0; --t) {
    const LstmCellStep& s = fw.steps[t];
    const VecX do_ = (dh.array() * s.tanh_c.array()).matrix();
    dc += (dh.array() * s.o.array() * (1.0 - s.tanh_c.array().square())).matrix();
    const VecX df = (dc.array() * s.c_prev.array()).matrix();
    const VecX di = (dc.array() * s.g.array()).matrix();
    const VecX dg = (dc.array() * s.i.array()).matrix();
    const VecX dc_prev = (dc.array() * s.f.array()).matrix();

    const VecX df_pre = (df.array() * s.f.array() * (1.0 - s.f.array())).matrix();
    const VecX di_pre = (di.array() * s.i.array() * (1.0 - s.i.array())).matrix();
    const VecX dg_pre = (dg.array() * (1.0 - s.g.array().square())).matrix();
    const VecX do_pre = (do_.array() * s.o.array() * (1.0 - s.o.array())).matrix();

    g.W_f.noalias() += df_pre * s.z.transpose();
    g.W_i.noalias() += di_pre * s.z.transpose();
    g.W_g.noalias() += dg_pre * s.z.transpose();
    g.W_o.noalias() += do_pre * s.z.transpose();
    g.b_f += df_pre;
    g.b_i += di_pre;
    g.b_g += dg_pre;
    g.b_o += do_pre;

    VecX dz = p.W_f.transpose() * df_pre;
    dz.noalias() += p.W_i.transpose() * di_pre;
    dz.noalias() += p.W_g.transpose() * dg_pre;
    dz.noalias() += p.W_o.transpose() * do_pre;

    const VecX dx = dz.head(p.input_size);
    g.W_in.noalias() += dx * fw.enc_norm[t].transpose();
    g.b_in += dx;

    dh = dz.tail(p.hidden_size);
    dc = dc_prev;
  }
  return g;
}

struct TrainingConfig {
  int sequence_length = 50;
  double learning_rate = 0.001;
  int max_epochs = 200;
  double dropout_keep_prob = 0.9;
  int early_stopping_patience = 10;
  int hidden_size = 64;
  std::uint64_t seed = 0;
  double grad_clip = 5.0;  // stabilizes backpropagation through long windows

  void validate() const {
    if (sequence_length < 2) throw std::invalid_argument("sequence_length must be >= 2");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(dropout_keep_prob > 0.0) || dropout_keep_prob > 1.0)
      throw std::invalid_argument("dropout_keep_prob must be in (0,1]");
    if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
  }
};

struct PoseWindow {
  std::vector<Pose6D> inputs;  // sequence_length poses
  Pose6D target;               // the pose that follows the window
};

/// Stride-1 sliding windows: inputs are L consecutive poses, the target is
/// the (L+1)-th.
inline std::vector<PoseWindow> window_dataset(const std::vector<Pose6D>& traj, int L) {
  if (L < 2) throw std::invalid_argument("window_dataset: window length must be >= 2");
  if (static_cast<int>(traj.size()) <= L)
    throw std::invalid_argument("window_dataset: trajectory shorter than one window");
  std::vector<PoseWindow> out;
  out.reserve(traj.size() - L);
  for (size_t start = 0; start + L < traj.size(); ++start) {
    PoseWindow w;
    w.inputs.assign(traj.begin() + start, traj.begin() + start + L);
    w.target = traj[start + L];
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<VecX> encode_window(const std::vector<Pose6D>& poses) {
  if (poses.size() < 2) throw std::invalid_argument("encode_window: need >= 2 poses");
  std::vector<VecX> enc;
  enc.reserve(poses.size() - 1);
  for (size_t i = 0; i + 1 < poses.size(); ++i) enc.push_back(encode_step(poses[i], poses[i + 1]));
  return enc;
}

struct TrainResult {
  LstmParameters params;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  int epochs_run = 0;
};

/// Plain SGD with gradient-norm clipping, dropout on the hidden-to-output
/// projection, and early stopping on a held-out split. Deterministic per seed.
inline TrainResult lstm_train(const std::vector<std::vector<Pose6D>>& trajectories,
                              const TrainingConfig& cfg) {
  cfg.validate();
  struct Sample {
    std::vector<VecX> enc;
    VecX target;
  };
  std::vector<Sample> samples;
  for (const auto& traj : trajectories) {
    if (static_cast<int>(traj.size()) <= cfg.sequence_length) continue;
    for (const PoseWindow& w : window_dataset(traj, cfg.sequence_length)) {
      Sample s;
      s.enc = encode_window(w.inputs);
      s.target = encode_step(w.inputs.back(), w.target);
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty())
    throw std::invalid_argument("lstm_train: no window of the requested length fits the data");

  RngStream rng(cfg.seed, 0x4c53544dULL, 0, 0);

  // deterministic shuffle, then hold out every tenth sample for validation
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform() * i)]);
  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < order.size(); ++i)
    (i % 10 == 9 ? val_idx : train_idx).push_back(order[i]);
  if (val_idx.empty()) val_idx.push_back(train_idx.back());

  LstmParameters p = LstmParameters::random_init(cfg.hidden_size, kPoseEncodingDim, rng);

  // normalization statistics from the training split
  VecX mean = VecX::Zero(kPoseEncodingDim);
  long count = 0;
  for (size_t idx : train_idx)
    for (const VecX& e : samples[idx].enc) {
      mean += e;
      ++count;
    }
  mean /= static_cast<double>(count);
  VecX var = VecX::Zero(kPoseEncodingDim);
  for (size_t idx : train_idx)
    for (const VecX& e : samples[idx].enc) var += (e - mean).array().square().matrix();
  var /= static_cast<double>(count);
  p.input_mean = mean;
  p.input_scale = (var.array().sqrt() + 1e-8).matrix();

  const auto val_loss = [&](const LstmParameters& params) {
    double acc = 0.0;
    for (size_t idx : val_idx)
      acc += lstm_loss(lstm_sequence_forward(samples[idx].enc, params), samples[idx].target);
    return acc / static_cast<double>(val_idx.size());
  };

  TrainResult result;
  result.initial_val_loss = val_loss(p);
  result.best_val_loss = result.initial_val_loss;
  result.params = p;
  int since_best = 0;

  std::vector<size_t> sched = train_idx;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (size_t i = sched.size(); i > 1; --i)
      std::swap(sched[i - 1], sched[static_cast<size_t>(rng.uniform() * i)]);
    for (size_t idx : sched) {
      VecX mask(cfg.hidden_size);
      if (cfg.dropout_keep_prob < 1.0) {
        for (int j = 0; j < cfg.hidden_size; ++j)
          mask[j] = rng.uniform() < cfg.dropout_keep_prob ? 1.0 / cfg.dropout_keep_prob : 0.0;
      } else {
        mask.setOnes();
      }
      LstmParameters grad = lstm_backward(samples[idx].enc, samples[idx].target, p, nullptr, &mask);
      const double gn = grad.grad_norm();
      const double scale = gn > cfg.grad_clip ? cfg.grad_clip / gn : 1.0;
      p.axpy(-cfg.learning_rate * scale, grad);
    }
    result.epochs_run = epoch + 1;
    const double v = val_loss(p);
    if (v < result.best_val_loss) {
      result.best_val_loss = v;
      result.params = p;
      since_best = 0;
    } else if (++since_best >= cfg.early_stopping_patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// parameter file: versioned JSON with named tensors

inline constexpr int kLstmFormatVersion = 1;

namespace detail {

inline nlohmann::json tensor_json(const MatX& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json tensor_json(const VecX& v) {
  nlohmann::json row = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
  return row;
}

inline MatX mat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw IoError("parameter file: bad matrix tensor");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  MatX m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw IoError("parameter file: ragged matrix tensor");
    for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline VecX vec_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("parameter file: bad vector tensor");
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

} // namespace detail

inline void save_lstm_parameters(const std::string& path, const LstmParameters& p) {
  p.check_consistent();
  nlohmann::json j;
  j["format_version"] = kLstmFormatVersion;
  j["encoding"] = "pose-delta-7";
  j["hidden_size"] = p.hidden_size;
  j["input_size"] = p.input_size;
  j["tensors"]["W_f"] = detail::tensor_json(p.W_f);
  j["tensors"]["W_i"] = detail::tensor_json(p.W_i);
  j["tensors"]["W_g"] = detail::tensor_json(p.W_g);
  j["tensors"]["W_o"] = detail::tensor_json(p.W_o);
  j["tensors"]["b_f"] = detail::tensor_json(p.b_f);
  j["tensors"]["b_i"] = detail::tensor_json(p.b_i);
  j["tensors"]["b_g"] = detail::tensor_json(p.b_g);
  j["tensors"]["b_o"] = detail::tensor_json(p.b_o);
  j["tensors"]["W_in"] = detail::tensor_json(p.W_in);
  j["tensors"]["b_in"] = detail::tensor_json(p.b_in);
  j["tensors"]["W_out"] = detail::tensor_json(p.W_out);
  j["tensors"]["b_out"] = detail::tensor_json(p.b_out);
  j["tensors"]["input_mean"] = detail::tensor_json(p.input_mean);
  j["tensors"]["input_scale"] = detail::tensor_json(p.input_scale);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open parameter file for writing: " + path);
  out << j.dump(1) << "\n";
}

inline LstmParameters load_lstm_parameters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parameter file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parameter file parse error in " + path + ": " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kLstmFormatVersion)
    throw IoError("parameter file " + path + ": unsupported or missing format_version");
  LstmParameters p;
  p.hidden_size = j.at("hidden_size").get<int>();
  p.input_size = j.at("input_size").get<int>();
  const auto& t = j.at("tensors");
  p.W_f = detail::mat_from_json(t.at("W_f"));
  p.W_i = detail::mat_from_json(t.at("W_i"));
  p.W_g = detail::mat_from_json(t.at("W_g"));
  p.W_o = detail::mat_from_json(t.at("W_o"));
  p.b_f = detail::vec_from_json(t.at("b_f"));
  p.b_i = detail::vec_from_json(t.at("b_i"));
  p.b_g = detail::vec_from_json(t.at("b_g"));
  p.b_o = detail::vec_from_json(t.at("b_o"));
  p.W_in = detail::mat_from_json(t.at("W_in"));
  p.b_in = detail::vec_from_json(t.at("b_in"));
  p.W_out = detail::mat_from_json(t.at("W_out"));
  p.b_out = detail::vec_from_json(t.at("b_out"));
  p.input_mean = detail::vec_from_json(t.at("input_mean"));
  p.input_scale = detail::vec_from_json(t.at("input_scale"));
  p.check_consistent();
  return p;
}

} // namespace sfuse
