// Copyright 2026 The Preictal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Alarm generation from window probabilities and event-level scoring.

#ifndef PREICTAL_ALARM_EVAL_HPP_
#define PREICTAL_ALARM_EVAL_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "preictal/eegio.hpp"

namespace preictal {

struct PredictionPoint {
  double window_start_s = 0.0;
  double probability = 0.0;  // preictal class
};

struct PredictionStream {
  std::string patient_id;
  std::vector<PredictionPoint> points;  // strictly increasing starts
  double window_len_s = 30.0;
  double threshold = 0.5;

  void validate() const;
  // probability >= threshold per point.
  std::vector<bool> positives() const;
};

struct AlarmTimeline {
  std::vector<double> alarm_times_s;
  double refractory_s = 1800.0;
};

/// Indices i >= n - 1 whose trailing n decisions contain at least k
/// positives. Throws ConfigError unless 1 <= k <= n.
std::vector<std::size_t> k_of_n_raw(const std::vector<bool>& positive, int k, int n);

/// Raw alarms of the stream, each stamped at the end of its triggering
/// window, with alarms closer than refractory_s to the previous emitted
/// alarm dropped. The trailing count only spans windows that tile time
/// without gaps; a gap in the stream restarts it.
AlarmTimeline k_of_n_alarms(const PredictionStream& stream, int k = 8, int n = 10,
                            double refractory_s = 1800.0);

struct RecordSpan {
  double begin_s = 0.0;
  double end_s = 0.0;
};

struct SeizureOutcome {
  SeizureEvent seizure;
  bool predicted = false;
  std::optional<double> alarm_time_s;  // earliest predicting alarm
};

struct EventScore {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double interictal_hours = 0.0;
  std::vector<SeizureOutcome> seizures;
};

/// An alarm at t predicts onsets in [t + sph_s, t + sph_s + sop_s]. Each
/// seizure is TP or FN; an alarm whose window holds no onset is FP.
/// Interictal hours are the span minus the union of
/// [onset - sph_s - sop_s, offset] over all seizures.
EventScore score_events(const AlarmTimeline& alarms, const std::vector<SeizureEvent>& seizures,
                        double sop_s, double sph_s, const RecordSpan& span);
// Monitored time split into disjoint spans; interictal hours sum over them.
EventScore score_events(const AlarmTimeline& alarms, const std::vector<SeizureEvent>& seizures,
                        double sop_s, double sph_s, const std::vector<RecordSpan>& spans);

// 100 tp / (tp + fn); empty when there are no seizures.
std::optional<double> sensitivity(const EventScore& score);
// fp per interictal hour; empty when there are no interictal hours.
std::optional<double> fpr(const EventScore& score);

/// 1 - exp(-fpr * sop).
double chance_probability(double fpr_per_hour, double sop_hours);

/// P(X >= k) for X ~ Binomial(L, P).
double chance_significance(int k, int L, double P);

struct PatientRow {
  std::string patient_id;
  int n_seizures = 0;
  double eeg_hours = 0.0;
  std::optional<double> sensitivity_pct;
  std::optional<double> fpr_per_hour;
  std::optional<double> window_sensitivity_pct;  // preictal windows flagged positive
  EventScore score;
};

PatientRow make_patient_row(const std::string& patient_id, const EventScore& score,
                            double eeg_hours,
                            std::optional<double> window_sensitivity_pct = std::nullopt);

struct EvalReport {
  std::vector<PatientRow> rows;
  // Unweighted means over patients with a defined value.
  std::optional<double> mean_sensitivity_pct;
  std::optional<double> mean_fpr_per_hour;
  // Sensitivity weighted by seizure count.
  std::optional<double> weighted_sensitivity_pct;
  int total_seizures = 0;
  int total_tp = 0;
  double total_hours = 0.0;
  double sop_hours = 0.5;
  double p_chance = 0.0;
  double p_value = 1.0;
};

/// Aggregates rows in order. p_chance uses the mean FPR; p_value is the
/// chance of predicting at least total_tp of total_seizures seizures.
EvalReport build_report(std::vector<PatientRow> rows, double sop_hours);

// patient,n_seizures,eeg_hours,sensitivity_pct,fpr_per_hour, then rows named
// aggregate, P_chance and p_value. Undefined values print as NA.
std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace preictal

#endif  // PREICTAL_ALARM_EVAL_HPP_
