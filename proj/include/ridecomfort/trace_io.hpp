#pragma once

// CSV ingestion and emission for traces and 1-D profiles.

#include <filesystem>
#include <iosfwd>

#include "ridecomfort/road.hpp"
#include "ridecomfort/signals.hpp"

namespace ridecomfort {

/// Reads a trace whose header names a subset of
/// `t,vx,ax,ay,az,phi_rate,theta_rate,psi_rate,s` (t is mandatory). The time
/// column must be uniform to within 1e-6 of the mean step.
VehicleResponse read_trace_csv(std::istream& in);
VehicleResponse read_trace_csv(const std::filesystem::path& path);

/// Writes every present channel in canonical column order.
void write_trace_csv(std::ostream& out, const VehicleResponse& trace);
void write_trace_csv(const std::filesystem::path& path, const VehicleResponse& trace);

/// Two-column profile CSV: station (m), elevation (m). A header line is optional.
Profile read_profile_csv(std::istream& in);
Profile read_profile_csv(const std::filesystem::path& path);
void write_profile_csv(std::ostream& out, const Profile& profile);

}  // namespace ridecomfort
