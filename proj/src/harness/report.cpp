/* Copyright 2026 The Magnus Authors. All Rights Reserved.

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

#include "harness/report.h"

#include <cstdio>
#include <sstream>

namespace magnus {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "policy,rate,instances,seed,n_requests,n_completed,n_rejected,"
         "request_throughput,token_throughput,valid_token_throughput,"
         "avg_response_time_s,p95_response_time_s,oom_events,retrain_events\n";
  for (const auto& m : reports) {
    out << csv_field(m.policy) << ',' << num(m.rate) << ',' << m.instances << ',' << m.seed
        << ',' << m.n_requests << ',' << m.n_completed << ',' << m.n_rejected << ','
        << num(m.request_throughput) << ',' << num(m.token_throughput) << ','
        << num(m.valid_token_throughput) << ',' << num(m.avg_response_time_s) << ','
        << num(m.p95_response_time_s) << ',' << m.oom_events << ',' << m.retrain_events
        << '\n';
  }
  return out.str();
}

}  // namespace magnus
