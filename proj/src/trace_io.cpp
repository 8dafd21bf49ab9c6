#include "gne/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gne/errors.hpp"

namespace gne {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "iter,fp_res,kkt_stat,kkt_feas,kkt_comp,kkt_cons,rel_dist,cpu_s,"
         "comm_rounds,grad_evals\n";
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const TraceRow& r : trace.rows) {
    out << r.iter << ',' << format_double(r.fp_res) << ',' << field(r.kkt_stat) << ','
        << field(r.kkt_feas) << ',' << field(r.kkt_comp) << ',' << field(r.kkt_cons)
        << ',' << field(r.rel_dist) << ',' << format_double(r.cpu_s) << ','
        << r.comm_rounds << ',' << r.grad_evals << '\n';
  }
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

void write_message_csv(const std::string& path, const MessageStats& stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "iter,phase,messages,scalars_sent\n";
  for (const MessageStatsRow& r : stats.rows)
    out << r.iter << ',' << r.phase << ',' << r.messages << ',' << r.scalars << '\n';
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

}  // namespace gne
