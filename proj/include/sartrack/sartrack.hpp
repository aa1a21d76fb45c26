#ifndef SARTRACK_SARTRACK_HPP
#define SARTRACK_SARTRACK_HPP

#include "sartrack/control.hpp"
#include "sartrack/errors.hpp"
#include "sartrack/geometry.hpp"
#include "sartrack/identity.hpp"
#include "sartrack/io.hpp"
#include "sartrack/mission.hpp"
#include "sartrack/range.hpp"
#include "sartrack/rng.hpp"
#include "sartrack/scenario.hpp"
#include "sartrack/simworld.hpp"
#include "sartrack/sysid.hpp"
#include "sartrack/telemetry.hpp"

#endif // SARTRACK_SARTRACK_HPP
