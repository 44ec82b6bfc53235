#pragma once

// Umbrella header for the whole runtime: registries and lineage, the
// persistence codec, model gateway, tracer, evolution engine, optimizers,
// the control-plane server and the agent bus.

#include "agp/errors.hpp"
#include "agp/version.hpp"
#include "agp/hash.hpp"
#include "agp/text.hpp"
#include "agp/record.hpp"
#include "agp/lineage.hpp"
#include "agp/toolscript.hpp"
#include "agp/tracer.hpp"
#include "agp/gateway.hpp"
#include "agp/contract.hpp"
#include "agp/variables.hpp"
#include "agp/instance.hpp"
#include "agp/registry.hpp"
#include "agp/persistence.hpp"
#include "agp/rl.hpp"
#include "agp/sepl.hpp"
#include "agp/optimizers.hpp"
#include "agp/server.hpp"
#include "agp/bus.hpp"
#include "agp/toytasks.hpp"
