#pragma once

#include <string>

#include "gne/distsim.hpp"
#include "gne/solvers.hpp"

namespace gne {

// Trace CSV: header row, '.' decimal separator, line-feed terminators.
// Columns: iter,fp_res,kkt_stat,kkt_feas,kkt_comp,kkt_cons,rel_dist,cpu_s,
// comm_rounds,grad_evals. rel_dist is empty when no reference was supplied.
void write_trace_csv(const std::string& path, const RunTrace& trace);

// Message accounting CSV: iter,phase,messages,scalars_sent.
void write_message_csv(const std::string& path, const MessageStats& stats);

// Full-precision decimal rendering used by every CSV field.
std::string format_double(double v);

}  // namespace gne
