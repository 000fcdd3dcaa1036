/* Copyright 2026 The UCM-Net Engine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucmnet/data.hpp"
#include "ucmnet/loss.hpp"
#include "ucmnet/metrics.hpp"
#include "ucmnet/model.hpp"
#include "ucmnet/optim.hpp"
#include "ucmnet/serialize.hpp"

namespace ucm {

// Raised when a training loss stops being finite.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(std::size_t epoch, std::size_t batch, const std::string& ids)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           " (samples " + ids + ")"),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_, batch_;
};

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  std::size_t eval_batch_size = 1;
  AdamWConfig optim;
  std::size_t t_max = 50;
  double eta_min = 1e-5;
  LrSchedule schedule = LrSchedule::periodic;
  std::uint64_t seed = 42;
  bool augment = true;
  AugmentConfig augmentation;
  LossConfig loss;
  double threshold = 0.5;
  std::filesystem::path output_dir = "runs";
};

struct HistoryRow {
  std::size_t epoch = 0;  // 1-based
  double lr = 0, train_loss = 0;
  double test_miou = 0, test_mdice = 0, test_miou_star = 0, test_mdice_star = 0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_miou = -1.0;
};

inline void write_history_header(std::ostream& os) {
  os << "epoch,lr,train_loss,test_miou,test_mdice,test_miou_star,test_mdice_star\n";
}

inline void write_history_row(std::ostream& os, const HistoryRow& r) {
  std::ostringstream line;
  line << std::setprecision(9) << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.test_miou << ','
       << r.test_mdice << ',' << r.test_miou_star << ',' << r.test_mdice_star << '\n';
  os << line.str();
}

// Per-image confusion counts of the model on one split, in eval mode.
inline MetricsReport evaluate(SegmentationModel<float>& model, const SegmentationDataset& data,
                              const std::string& split, double threshold = 0.5, double smooth = 1.0,
                              std::size_t batch_size = 1) {
  const std::size_t n = data.split(split).size();
  if (n == 0) throw DataError("split '" + split + "' is empty");
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard no_grad;
  std::vector<ConfusionCounts> counts;
  for (const auto& idx : batch_plan(n, batch_size, std::nullopt)) {
    const Batch batch = data.batch(split, idx);
    const Tensor<float> probs = sigmoid(model.forward(batch.images).logits);
    const std::size_t per = probs.numel() / idx.size();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      counts.push_back(confusion(probs.data().subspan(b * per, per), batch.masks.data().subspan(b * per, per),
                                 threshold));
    }
  }
  model.set_training(was_training);
  return metrics_report(counts, smooth, split);
}

// Epoch loop: augment, forward, group loss, backward, AdamW; then a test
// pass. Writes history.csv, best.ucmw (by test mIoU), last.ucmw, last.ckpt.
inline TrainResult train(SegmentationModel<float>& model, const SegmentationDataset& data, const TrainConfig& cfg,
                         std::ostream* log = nullptr) {
  if (cfg.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (data.split("train").empty()) throw DataError("train split is empty");
  if (data.split("test").empty()) throw DataError("test split is empty");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  std::ofstream history(cfg.output_dir / "history.csv", std::ios::trunc);
  if (!history) throw DataError("cannot write " + (cfg.output_dir / "history.csv").string());
  write_history_header(history);

  AdamW<float> optim(model.params(), cfg.optim);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.optim.lr, cfg.t_max, cfg.eta_min, cfg.schedule);
    optim.set_lr(lr);
    model.set_training(true);
    const auto plan = data.train_plan(cfg.batch_size, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const Batch batch = data.train_batch(plan[b], cfg.seed, epoch, cfg.augmentation, cfg.augment);
      active_tape<float>().clear();
      const auto out = model.forward(batch.images);
      const Tensor<float> loss = group_loss(out.logits, out.stage_logits, batch.masks, cfg.loss);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        active_tape<float>().clear();
        std::string ids;
        for (const auto& id : batch.ids) ids += (ids.empty() ? "" : " ") + id;
        throw NumericAbort(epoch + 1, b, ids);
      }
      optim.zero_grad();
      backward(loss);
      optim.step();
      loss_sum += value;
    }
    const MetricsReport report = evaluate(model, data, "test", cfg.threshold, cfg.loss.smooth, cfg.eval_batch_size);
    HistoryRow row{epoch + 1, lr, loss_sum / static_cast<double>(plan.size()),
                   report.miou, report.mdice, report.miou_star, report.mdice_star};
    write_history_row(history, row);
    history.flush();
    result.history.push_back(row);
    if (report.miou > result.best_miou) {
      result.best_miou = report.miou;
      result.best_epoch = epoch + 1;
      save_weights(cfg.output_dir / "best.ucmw", model.params());
    }
    save_weights(cfg.output_dir / "last.ucmw", model.params());
    save_checkpoint(cfg.output_dir / "last.ckpt", model.params(), optim, TrainingState{epoch + 1});
    if (log) {
      std::ostringstream line;
      line << std::fixed << std::setprecision(6) << "epoch " << row.epoch << "/" << cfg.epochs << "  lr " << lr
           << "  loss " << row.train_loss << "  mIoU " << row.test_miou << "  mDice " << row.test_mdice << "  mIoU* "
           << row.test_miou_star << "  mDice* " << row.test_mdice_star << '\n';
      *log << line.str() << std::flush;
    }
  }
  return result;
}

}  // namespace ucm
