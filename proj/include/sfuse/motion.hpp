#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfuse/lstm.hpp"
#include "sfuse/pose.hpp"

namespace sfuse {

/// Deterministic one-step pose predictor from a history window. Process noise
/// is the caller's responsibility. Implementations are pure and thread-safe.
class MotionModel {
 public:
  virtual ~MotionModel() = default;
  virtual Pose6D predict(std::span<const Pose6D> history) const = 0;
  virtual std::string id() const = 0;
};

/// Extrapolates the last pose by the most recent pose delta.
inline Pose6D cv_predict(std::span<const Pose6D> history) {
  if (history.size() < 2)
    throw std::invalid_argument("cv_predict: need at least 2 poses");
  const Pose6D& prev = history[history.size() - 2];
  const Pose6D& last = history[history.size() - 1];
  return compose(last, between(prev, last));
}

class ConstantVelocityModel final : public MotionModel {
 public:
  Pose6D predict(std::span<const Pose6D> history) const override {
    return cv_predict(history);
  }
  std::string id() const override { return "cv"; }
};

class LstmMotionModel final : public MotionModel {
 public:
  explicit LstmMotionModel(LstmParameters params) : params_(std::move(params)) {
    params_.check_consistent();
  }

  Pose6D predict(std::span<const Pose6D> history) const override {
    if (history.size() < 2)
      throw std::invalid_argument("LstmMotionModel: need at least 2 poses");
    std::vector<VecX> enc;
    enc.reserve(history.size() - 1);
    for (size_t i = 0; i + 1 < history.size(); ++i)
      enc.push_back(encode_step(history[i], history[i + 1]));
    const VecX out = lstm_sequence_forward(enc, params_);
    return compose(history.back(), decode_step(out));
  }

  std::string id() const override { return "lstm"; }

  const LstmParameters& parameters() const { return params_; }

 private:
  LstmParameters params_;
};

/// Build a single-argument predictor from a history window: the argument
/// replaces the last pose, everything earlier stays fixed. Equivalent to
/// model.predict on the modified window but shares the prefix computation, so
/// evaluating a fan of candidate poses (sigma points) costs one cell step
/// each instead of a full sequence pass.
inline std::function<Pose6D(const Pose6D&)> one_step_predictor(
    const MotionModel& model, std::span<const Pose6D> history) {
  if (history.size() < 2) return [](const Pose6D& x) { return x; };
  if (const auto* lstm = dynamic_cast<const LstmMotionModel*>(&model)) {
    const LstmParameters& p = lstm->parameters();
    VecX h = VecX::Zero(p.hidden_size);
    VecX c = VecX::Zero(p.hidden_size);
    for (size_t i = 0; i + 2 < history.size(); ++i) {
      const VecX e = encode_step(history[i], history[i + 1]);
      const VecX en = ((e - p.input_mean).array() / p.input_scale.array()).matrix();
      const LstmCellStep s = lstm_cell_forward(p.W_in * en + p.b_in, h, c, p);
      h = s.h;
      c = s.c;
    }
    const Pose6D prev = history[history.size() - 2];
    return [&p, h, c, prev](const Pose6D& x) {
      const VecX e = encode_step(prev, x);
      const VecX en = ((e - p.input_mean).array() / p.input_scale.array()).matrix();
      const LstmCellStep s = lstm_cell_forward(p.W_in * en + p.b_in, h, c, p);
      return compose(x, decode_step(p.W_out * s.h + p.b_out));
    };
  }
  if (dynamic_cast<const ConstantVelocityModel*>(&model)) {
    const Pose6D prev = history[history.size() - 2];
    return [prev](const Pose6D& x) { return compose(x, between(prev, x)); };
  }
  const MotionModel* m = &model;
  std::vector<Pose6D> window(history.begin(), history.end());
  return [m, window](const Pose6D& x) {
    std::vector<Pose6D> w = window;
    w.back() = x;
    return m->predict(w);
  };
}

inline std::unique_ptr<MotionModel> make_motion_model(const std::string& name,
                                                      const std::string& param_path = {}) {
  if (name == "cv") return std::make_unique<ConstantVelocityModel>();
  if (name == "lstm") {
    if (param_path.empty())
      throw std::invalid_argument("lstm motion model requires a parameter file");
    return std::make_unique<LstmMotionModel>(load_lstm_parameters(param_path));
  }
  throw std::invalid_argument("unknown motion model: " + name);
}

} // namespace sfuse
