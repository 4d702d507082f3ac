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

// Window labeling, class balancing and leakage-safe splits.

#ifndef PREICTAL_DATASET_HPP_
#define PREICTAL_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "preictal/eegio.hpp"
#include "preictal/spectral.hpp"

namespace preictal {

// Class index used by the classifier head.
enum class WindowLabel : int { kInterictal = 0, kPreictal = 1 };
enum class WindowSource { kStrideNative, kOversampled };

std::string label_name(WindowLabel label);
std::string source_name(WindowSource source);
WindowLabel parse_label(const std::string& name);
WindowSource parse_source(const std::string& name);

struct LabelingPolicy {
  double sop_s = 1800.0;
  double sph_s = 180.0;
  double preictal_horizon_s = 1800.0;
  double interictal_margin_s = 14400.0;
  double window_len_s = 30.0;
  double merge_gap_s = 1800.0;

  void validate() const;
};

/// Identity of a 30 s window: "patient_id:start_s:label:source".
struct WindowRef {
  std::string patient_id;
  double start_s = 0.0;
  WindowLabel label = WindowLabel::kInterictal;
  WindowSource source = WindowSource::kStrideNative;

  std::string id() const;
  static WindowRef parse(const std::string& id);
  // Cache file name, "<patient>_<start>_<label>_<source>.spec".
  std::string cache_filename() const;
  bool operator==(const WindowRef&) const = default;
};

struct LabeledWindow {
  Spectrogram spectrogram;
  WindowLabel label = WindowLabel::kInterictal;
  double window_start_s = 0.0;
  std::string patient_id;
  WindowSource source = WindowSource::kStrideNative;
};

struct Interval {
  double begin_s = 0.0;
  double end_s = 0.0;
  double length_s() const { return end_s - begin_s; }
  bool operator==(const Interval&) const = default;
};

// Formats a time in seconds with the shortest exact representation.
std::string format_seconds(double seconds);

/// Merges consecutive events separated by less than `gap_s`. The merged
/// event keeps the first onset and the last offset. Throws
/// PreconditionError on unsorted or overlapping input.
std::vector<SeizureEvent> merge_seizures(const std::vector<SeizureEvent>& events,
                                         double gap_s = 1800.0);

struct WindowLabelEntry {
  double start_s = 0.0;
  WindowLabel label = WindowLabel::kInterictal;
  bool operator==(const WindowLabelEntry&) const = default;
};

/// Stride-native windows of `rec` that fall in a labeled region.
///
/// For each seizure with onset T, windows fully inside
/// [T - sph - horizon, T - sph) are preictal. A window is interictal when it
/// lies at least interictal_margin_s from every seizure interval and does
/// not touch any [T - sph - horizon, T) zone. Windows overlapping a seizure
/// are never labeled.
std::vector<WindowLabelEntry> label_windows(const AnnotatedRecording& rec,
                                            const LabelingPolicy& policy);

/// Windows of length `window_len_s` starting at begin, begin + S, ... inside
/// each interval. Starts on the native grid (multiples of window_len_s from
/// the interval start) are marked stride_native, the rest oversampled.
std::vector<WindowRef> oversample_preictal(const std::string& patient_id,
                                           const std::vector<Interval>& intervals,
                                           double stride_s, double window_len_s = 30.0,
                                           WindowLabel label = WindowLabel::kPreictal);

// Window count produced by oversample_preictal for one stride.
std::size_t oversampled_count(const std::vector<Interval>& intervals, double stride_s,
                              double window_len_s = 30.0);

// Strides tried by choose_stride, largest first.
const std::vector<double>& stride_grid();

struct StrideChoice {
  double stride_s = 30.0;
  std::size_t count = 0;
  bool shortfall = false;  // even S = 1 s cannot reach the target
};

/// Largest stride from stride_grid() whose window count reaches
/// target_count; S = 1 with shortfall set when none does.
StrideChoice choose_stride(const std::vector<Interval>& intervals, std::size_t target_count,
                           double window_len_s = 30.0);
double choose_stride(double preictal_budget_s, std::size_t target_count,
                     double window_len_s = 30.0);

struct SplitManifest {
  std::vector<WindowRef> train;
  std::vector<WindowRef> test;
  double ratio = 0.8;
  std::uint64_t seed = 0;

  bool operator==(const SplitManifest&) const = default;
};

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::filesystem::path& path);

/// Chronological hold-out per patient timeline: the last
/// round((1 - ratio) * n) stride-native windows of each patient form that
/// patient's test block. Everything earlier is training data.
SplitManifest split_dataset(const std::vector<WindowRef>& windows, double ratio,
                            std::uint64_t seed);

struct BalanceSummary {
  std::string patient_id;
  WindowLabel oversampled_class = WindowLabel::kPreictal;
  double stride_s = 30.0;
  std::size_t preictal = 0;
  std::size_t interictal = 0;
  bool shortfall = false;
};

/// Oversamples the minority class of each patient's training windows with
/// choose_stride over its contiguous native runs, then keeps an evenly
/// spaced subset of the extra windows so both classes end up the same size
/// (unless the stride grid runs out). Test windows are untouched.
SplitManifest balance_training_split(SplitManifest manifest, const LabelingPolicy& policy,
                                     std::vector<BalanceSummary>* summary = nullptr);

/// Contiguous runs of stride-native windows with the given label.
std::vector<Interval> native_runs(const std::vector<WindowRef>& windows, WindowLabel label,
                                  double window_len_s);

struct PatientSeizures {
  std::string patient_id;
  std::vector<SeizureEvent> seizures;  // merged
};

/// One fold per merged seizure. A fold's test block is the span of that
/// seizure's patient between the midpoints to its neighbouring seizures;
/// training keeps every other stride-native window that does not overlap
/// the test span.
std::vector<SplitManifest> leave_one_seizure_out(const std::vector<WindowRef>& windows,
                                                 const std::vector<PatientSeizures>& seizures,
                                                 const LabelingPolicy& policy,
                                                 std::uint64_t seed);

}  // namespace preictal

#endif  // PREICTAL_DATASET_HPP_
