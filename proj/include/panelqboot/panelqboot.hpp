#pragma once

#include "panelqboot/alt_bootstrap.hpp"
#include "panelqboot/brute_force.hpp"
#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/inference.hpp"
#include "panelqboot/length_selection.hpp"
#include "panelqboot/loss.hpp"
#include "panelqboot/panel_data.hpp"
#include "panelqboot/partition.hpp"
#include "panelqboot/pwb.hpp"
#include "panelqboot/rng.hpp"
#include "panelqboot/simlab.hpp"
#include "panelqboot/weight_law.hpp"
