#pragma once

#define STOKES_VERSION "0.1.0"
