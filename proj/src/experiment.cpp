// Copyright 2026 The AF-Pipe Authors. All Rights Reserved.
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

#include "afpipe/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <system_error>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace {

namespace pt = boost::property_tree;
using Kind = ConfigError::Kind;

struct FieldSpec {
  std::string_view key;
  bool required;
};

// Accepted keys per section; anything else is a schema violation.
const std::map<std::string_view, std::vector<FieldSpec>>& schema() {
  static const std::map<std::string_view, std::vector<FieldSpec>> kSchema = {
      {"model",
       {{"layers", true},
        {"hidden", true},
        {"experts", true},
        {"topk", true},
        {"moe_hidden", true},
        {"gqa_group", false},
        {"bytes_per_element", false},
        {"param_bytes", false},
        {"optimizer_bytes_per_param", false}}},
      {"workload",
       {{"seq_len", true}, {"micro_batch", true}, {"num_microbatches", false}}},
      {"cluster",
       {{"total_gpus", true},
        {"gpus_per_node", false},
        {"total_nics", true},
        {"gpu_peak", true},
        {"ib_bw", true},
        {"nvlink_bw", false},
        {"gpu_memory", false}}},
      {"schedule",
       {{"schedule_kind", false},
        {"pipeline_depth", false},
        {"virtual_stages", false},
        {"ep_size", false},
        {"backward_multiplier", false}}},
  };
  return kSchema;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class SectionReader {
 public:
  SectionReader(const pt::ptree& root, std::string_view section)
      : section_(section) {
    if (auto child = root.get_child_optional(std::string(section))) {
      node_ = &*child;
    }
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback,
                       bool required) const {
    const auto raw = lookup(key, required);
    if (!raw) return fallback;
    std::int64_t value = 0;
    const char* end = raw->data() + raw->size();
    const auto [ptr, ec] = std::from_chars(raw->data(), end, value);
    if (ec != std::errc() || ptr != end) {
      throw ConfigError(Kind::kInvalidValue, std::string(key),
                        "expected an integer, got '" + *raw + "'");
    }
    return value;
  }

  double real(std::string_view key, double fallback, bool required) const {
    const auto raw = lookup(key, required);
    if (!raw) return fallback;
    double value = 0.0;
    const char* end = raw->data() + raw->size();
    const auto [ptr, ec] = std::from_chars(raw->data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
      throw ConfigError(Kind::kInvalidValue, std::string(key),
                        "expected a finite number, got '" + *raw + "'");
    }
    return value;
  }

  std::optional<std::string> text(std::string_view key) const {
    return lookup(key, false);
  }

 private:
  std::optional<std::string> lookup(std::string_view key, bool required) const {
    if (node_ != nullptr) {
      if (auto v = node_->get_optional<std::string>(std::string(key))) {
        return trim(*v);
      }
    }
    if (required) {
      throw ConfigError(Kind::kMissingField, std::string(key),
                        "required in section [" + std::string(section_) + "]");
    }
    return std::nullopt;
  }

  std::string_view section_;
  const pt::ptree* node_ = nullptr;
};

void check_schema(const pt::ptree& root) {
  const auto& sections = schema();
  for (const auto& [name, node] : root) {
    const auto it = sections.find(name);
    if (it == sections.end()) {
      throw ConfigError(Kind::kSchemaViolation, name, "unknown section");
    }
    if (node.empty()) {
      throw ConfigError(Kind::kSchemaViolation, name,
                        "expected a [section], found a bare key");
    }
    for (const auto& [key, leaf] : node) {
      bool known = false;
      for (const auto& spec : it->second) known = known || spec.key == key;
      if (!known) {
        throw ConfigError(Kind::kSchemaViolation, name + "." + key,
                          "unknown key");
      }
    }
  }
}

void append_double(std::ostringstream& out, double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.write(buf.data(), ptr - buf.data());
}

}  // namespace

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kAfPipe:
      return "afpipe";
    case ScheduleKind::kMegatron1F1B:
      return "megatron1f1b";
    case ScheduleKind::kChunkedOverlap:
      return "chunked";
    case ScheduleKind::kNaiveSequential:
      return "naive";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  for (ScheduleKind kind : kAllScheduleKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError(Kind::kInvalidValue, "schedule_kind",
                    "expected one of afpipe|megatron1f1b|chunked|naive, got '" +
                        std::string(name) + "'");
}

std::vector<Violation> validate(const Experiment& exp) {
  std::vector<Violation> out;
  auto require = [&out](bool ok, std::string field, std::string rule) {
    if (!ok) out.push_back({std::move(field), std::move(rule)});
  };
  const auto& m = exp.model;
  require(m.layers >= 1, "layers", "L >= 1");
  require(m.hidden >= 1, "hidden", "H >= 1");
  require(m.experts >= 1, "experts", "E >= 1");
  require(m.topk >= 1, "topk", "k >= 1");
  require(m.topk <= m.experts, "topk", "k exceeds E");
  require(m.moe_hidden >= 1, "moe_hidden", "D_e >= 1");
  require(m.gqa_group >= 1, "gqa_group", "g >= 1");
  require(m.bytes_per_element == 1 || m.bytes_per_element == 2 ||
              m.bytes_per_element == 4,
          "bytes_per_element", "e in {1, 2, 4}");
  require(m.param_bytes >= 1, "param_bytes", "param_bytes >= 1");
  require(m.optimizer_bytes_per_param >= 0.0, "optimizer_bytes_per_param",
          "optimizer_bytes_per_param >= 0");

  const auto& w = exp.workload;
  require(w.seq_len >= 1, "seq_len", "s >= 1");
  require(w.micro_batch >= 1, "micro_batch", "b >= 1");
  require(w.num_microbatches >= 1, "num_microbatches", "num_microbatches >= 1");

  const auto& c = exp.cluster;
  require(c.total_gpus >= 2, "total_gpus", "total_gpus >= 2");
  require(c.total_nics >= 2, "total_nics", "total_nics >= 2");
  require(c.gpu_peak > 0.0, "gpu_peak", "gpu_peak > 0");
  require(c.ib_bw > 0.0, "ib_bw", "ib_bw > 0");
  require(c.gpus_per_node >= 1 && c.gpus_per_node <= 8, "gpus_per_node",
          "gpus_per_node in [1, 8]");
  require(c.nvlink_bw >= 0.0, "nvlink_bw", "nvlink_bw >= 0");
  require(c.gpu_memory > 0.0, "gpu_memory", "gpu_memory > 0");

  require(exp.pipeline_depth >= 1, "pipeline_depth", "pipeline_depth >= 1");
  require(exp.virtual_stages >= 1, "virtual_stages", "virtual_stages >= 1");
  // Divided rather than multiplied so a huge p*v cannot wrap.
  require(exp.pipeline_depth < 1 || exp.virtual_stages < 1 ||
              exp.pipeline_depth <= m.layers / exp.virtual_stages,
          "pipeline_depth*virtual_stages", "pipeline_depth*virtual_stages <= L");
  require(exp.ep_size >= 1, "ep_size", "ep_size >= 1");
  require(exp.ep_size <= c.total_gpus, "ep_size", "ep_size <= total_gpus");
  require(exp.backward_multiplier >= 0.0, "backward_multiplier",
          "backward_multiplier >= 0");
  return out;
}

Experiment parse_experiment(std::string_view text) {
  pt::ptree root;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(Kind::kSchemaViolation, "line " + std::to_string(e.line()),
                      e.message());
  }
  check_schema(root);

  Experiment exp;
  const SectionReader model(root, "model");
  exp.model.layers = model.integer("layers", 0, true);
  exp.model.hidden = model.integer("hidden", 0, true);
  exp.model.experts = model.integer("experts", 0, true);
  exp.model.topk = model.integer("topk", 0, true);
  exp.model.moe_hidden = model.integer("moe_hidden", 0, true);
  exp.model.gqa_group = model.integer("gqa_group", 1, false);
  exp.model.bytes_per_element = model.integer("bytes_per_element", 2, false);
  exp.model.param_bytes = model.integer("param_bytes", 2, false);
  exp.model.optimizer_bytes_per_param =
      model.real("optimizer_bytes_per_param", 8.0, false);

  const SectionReader workload(root, "workload");
  exp.workload.seq_len = workload.integer("seq_len", 0, true);
  exp.workload.micro_batch = workload.integer("micro_batch", 0, true);
  exp.workload.num_microbatches = workload.integer("num_microbatches", 1, false);

  const SectionReader cluster(root, "cluster");
  exp.cluster.total_gpus = cluster.integer("total_gpus", 0, true);
  exp.cluster.gpus_per_node = cluster.integer("gpus_per_node", 8, false);
  exp.cluster.total_nics = cluster.integer("total_nics", 0, true);
  exp.cluster.gpu_peak = cluster.real("gpu_peak", 0.0, true);
  exp.cluster.ib_bw = cluster.real("ib_bw", 0.0, true);
  exp.cluster.nvlink_bw = cluster.real("nvlink_bw", 0.0, false);
  exp.cluster.gpu_memory = cluster.real("gpu_memory", 80e9, false);

  const SectionReader sched(root, "schedule");
  if (auto kind = sched.text("schedule_kind")) {
    exp.schedule_kind = parse_schedule_kind(*kind);
  }
  exp.pipeline_depth = sched.integer("pipeline_depth", 1, false);
  exp.virtual_stages = sched.integer("virtual_stages", 1, false);
  exp.ep_size = sched.integer("ep_size", 1, false);
  exp.backward_multiplier = sched.real("backward_multiplier", 2.0, false);

  if (const auto violations = validate(exp); !violations.empty()) {
    throw ConfigError(Kind::kInvalidValue, violations.front().field,
                      violations.front().rule);
  }
  return exp;
}

Experiment load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(Kind::kIo, path.string(), "no such file or unreadable");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str());
}

std::string serialize_experiment(const Experiment& exp) {
  std::ostringstream out;
  const auto& m = exp.model;
  out << "[model]\n"
      << "layers = " << m.layers << "\n"
      << "hidden = " << m.hidden << "\n"
      << "experts = " << m.experts << "\n"
      << "topk = " << m.topk << "\n"
      << "moe_hidden = " << m.moe_hidden << "\n"
      << "gqa_group = " << m.gqa_group << "\n"
      << "bytes_per_element = " << m.bytes_per_element << "\n"
      << "param_bytes = " << m.param_bytes << "\n"
      << "optimizer_bytes_per_param = ";
  append_double(out, m.optimizer_bytes_per_param);
  out << "\n\n[workload]\n"
      << "seq_len = " << exp.workload.seq_len << "\n"
      << "micro_batch = " << exp.workload.micro_batch << "\n"
      << "num_microbatches = " << exp.workload.num_microbatches << "\n";
  const auto& c = exp.cluster;
  out << "\n[cluster]\n"
      << "total_gpus = " << c.total_gpus << "\n"
      << "gpus_per_node = " << c.gpus_per_node << "\n"
      << "total_nics = " << c.total_nics << "\n"
      << "gpu_peak = ";
  append_double(out, c.gpu_peak);
  out << "\nib_bw = ";
  append_double(out, c.ib_bw);
  out << "\nnvlink_bw = ";
  append_double(out, c.nvlink_bw);
  out << "\ngpu_memory = ";
  append_double(out, c.gpu_memory);
  out << "\n\n[schedule]\n"
      << "schedule_kind = " << to_string(exp.schedule_kind) << "\n"
      << "pipeline_depth = " << exp.pipeline_depth << "\n"
      << "virtual_stages = " << exp.virtual_stages << "\n"
      << "ep_size = " << exp.ep_size << "\n"
      << "backward_multiplier = ";
  append_double(out, exp.backward_multiplier);
  out << "\n";
  return out.str();
}

}  // namespace afpipe
