// Copyright 2026 The deepgen authors
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

#ifndef DEEPGEN_METRICS_HPP
#define DEEPGEN_METRICS_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "deepgen/errors.hpp"

/// \file
/// \brief Append-only training metrics.
///
/// Every record is (epoch, batch, step, phase, value_name, value). Rows
/// outside a batch loop use -1 for the batch and step columns. The CSV sink
/// writes the fixed header `epoch,batch,step,phase,value_name,value` and
/// one row per record with values at full double precision, so equal runs
/// produce byte-identical logs.

namespace deepgen {

struct MetricsRecord {
  std::int64_t epoch = 0;
  std::int64_t batch = -1;
  std::int64_t step = -1;
  std::string phase;
  std::string value_name;
  double value = 0.0;
};

/// Consumer of training metrics; records arrive from one thread.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void record(const MetricsRecord& r) = 0;
};

/// Discards every record.
class NullMetricsSink : public MetricsSink {
 public:
  void record(const MetricsRecord&) override {}
};

/// Keeps records in memory; used by tests to assert counters.
class MemoryMetricsSink : public MetricsSink {
 public:
  void record(const MetricsRecord& r) override { records.push_back(r); }
  std::vector<MetricsRecord> records;
};

/// Streams records to a CSV file.
class CsvMetricsSink : public MetricsSink {
 public:
  explicit CsvMetricsSink(const std::filesystem::path& path) : out_(path) {
    if (!out_) {
      throw FormatError("cannot open metrics file " + path.string());
    }
    out_ << "epoch,batch,step,phase,value_name,value\n";
  }

  void record(const MetricsRecord& r) override {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out_ << r.epoch << ',' << r.batch << ',' << r.step << ',' << r.phase << ',' << r.value_name
         << ',' << buf << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace deepgen

#endif  // DEEPGEN_METRICS_HPP
