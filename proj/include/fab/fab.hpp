#pragma once

// Umbrella header for the fabric toolkit.

#include "fab/batch/scheduler.hpp"
#include "fab/config/compile.hpp"
#include "fab/config/profile.hpp"
#include "fab/config/schema.hpp"
#include "fab/config/template.hpp"
#include "fab/config/value.hpp"
#include "fab/node/agent.hpp"
#include "fab/node/state.hpp"
#include "fab/notify/broker.hpp"
#include "fab/pkg/package.hpp"
#include "fab/pkg/reconcile.hpp"
#include "fab/rundown/rundown.hpp"
#include "fab/secure/keyserver.hpp"
#include "fab/secure/provider.hpp"
#include "fab/sim/fleet.hpp"
#include "fab/sim/monitor.hpp"
#include "fab/sim/scenario.hpp"
#include "fab/sim/trace.hpp"
#include "fab/sim/transport.hpp"
#include "fab/util.hpp"
