# Times the scenario runner on a small and a large player count.
# MMOG_PERF_DURATION sets the seconds of play (default 5).

import os
import time

from pymmog.scenario import load_config, run_scenario

smallPlayers = 8
largePlayers = smallPlayers * 8

duration = float(os.environ.get('MMOG_PERF_DURATION') or 5.0)


def gettime():
    return time.time()


def run(players):
    config = load_config('mp32').with_changes(players=players,
                                              duration_s=duration,
                                              liveliness_check=False)
    report = run_scenario(config)
    if not report.passed:
        print("Run with %d players failed: %s" % (players, ', '.join(report.failed)))
    return report


# Begin SMALL_PLAYERS run
start = gettime()
small = run(smallPlayers)
smallElapsed = gettime() - start
print("Elapse time of SMALL_PLAYERS = %.4fs (%d datagrams)"
      % (smallElapsed, small['datagrams_sent']))

# Begin LARGE_PLAYERS run
start = gettime()
large = run(largePlayers)
largeElapsed = gettime() - start
print("Elapse time of LARGE_PLAYERS = %.4fs (%d datagrams)"
      % (largeElapsed, large['datagrams_sent']))

# Matching is quadratic in the player count; anything worse is a regression.
ratio = (largePlayers // smallPlayers) ** 2
if largeElapsed > smallElapsed * ratio * 2:
    print("Scenario is too slow!")

print("\n")
