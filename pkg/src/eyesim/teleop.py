"""WebSocket bridge between the live simulation and the teleop console.

The tick loop runs on its own thread and owns all simulation state; the
asyncio side owns the socket. They meet at two bounded, thread-safe hand-off
points: a last-writer-wins input slot per robot, and a bounded snapshot
deque that drops the oldest entry under backpressure so the loop never
blocks on a slow client.

Safety rules enforced here rather than in the UI: one operator session at a
time (a second connection is refused with `session-busy`), a robot whose
input stream goes silent for more than 200 ms of simulation time has its
pedal forced to zero, and a disconnect freezes both robots within one tick
while the session waits for a reconnect.
"""

from __future__ import annotations

import asyncio
import json
import math
import threading
import time
from collections import deque
from pathlib import Path

import numpy as np
from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from .engine import InputSample, RobotInput, TrialLog, step
from .formats import Scenario, build_world, scenario_hash, write_trial_csv
from .kinematics import rotation_log

PROTOCOL_VERSION = 1
STALE_INPUT_TIMEOUT = 0.2  # s of sim time without input before pedal drops
DEFAULT_DECIMATION = 10


def _parse_input_message(msg: dict) -> tuple[str, RobotInput]:
    """Validate a client input message; raises ValueError with a wire-level
    error token on any violation."""
    robot = msg.get("robot")
    if robot not in ("left", "right"):
        raise ValueError("bad-robot")
    v = msg.get("v")
    if not isinstance(v, list) or len(v) != 6:
        raise ValueError("bad-velocity")
    try:
        vec = [float(x) for x in v]
    except (TypeError, ValueError) as err:
        raise ValueError("bad-velocity") from err
    if not all(math.isfinite(x) for x in vec):
        raise ValueError("nan-field")
    pedal = msg.get("pedal")
    if not isinstance(pedal, (int, float)) or not 0.0 <= float(pedal) <= 1.0:
        raise ValueError("bad-pedal")
    clutch = msg.get("clutch")
    if clutch not in (0, 1):
        raise ValueError("bad-clutch")
    return robot, RobotInput(np.array(vec), pedal=float(pedal), clutch=int(clutch))


class _SimLoop:
    """Tick-loop thread: consumes the input slots, publishes snapshots."""

    def __init__(self, scenario: Scenario, tick_hz: float | None, decimation: int,
                 max_ticks: int | None):
        self.world = build_world(scenario)
        self.dt = self.world.dt
        self.tick_hz = (1.0 / self.dt) if tick_hz is None else tick_hz
        self.decimation = decimation
        self.max_ticks = max_ticks
        self.records = []
        self.snapshots: deque = deque(maxlen=64)
        self.snapshot_event: asyncio.Event | None = None
        self.loop: asyncio.AbstractEventLoop | None = None
        self._lock = threading.Lock()
        self._latest = {
            "right": RobotInput.idle(),
            "left": RobotInput.idle(),
        }
        self._last_input_t = {"right": -math.inf, "left": -math.inf}
        self._connected = False
        self._stop = threading.Event()
        self.finished = threading.Event()
        self.thread = threading.Thread(target=self._run, name="eyesim-tick-loop", daemon=True)

    # -- called from the asyncio side ---------------------------------------
    def submit_input(self, side: str, rin: RobotInput) -> None:
        with self._lock:
            self._latest[side] = rin
            self._last_input_t[side] = self.world.clock

    def set_connected(self, connected: bool) -> None:
        with self._lock:
            self._connected = connected

    def stop(self) -> None:
        self._stop.set()

    # -- tick thread ---------------------------------------------------------
    def _effective_inputs(self, t: float) -> InputSample:
        with self._lock:
            rins = {}
            for side in ("right", "left"):
                rin = self._latest[side]
                stale = (t - self._last_input_t[side]) > STALE_INPUT_TIMEOUT
                if stale or not self._connected:
                    rin = RobotInput(rin.command.copy(), pedal=0.0, clutch=rin.clutch)
                rins[side] = rin
            return InputSample(t=t, right=rins["right"], left=rins["left"])

    def _publish(self, record) -> None:
        self.snapshots.append(_state_message(self.world, record))
        if self.loop is not None and self.snapshot_event is not None:
            self.loop.call_soon_threadsafe(self.snapshot_event.set)

    def _run(self) -> None:
        start = time.perf_counter()
        while not self._stop.is_set():
            tick = self.world.tick_index
            if self.max_ticks is not None and tick >= self.max_ticks:
                break
            self.world, record = step(self.world, self._effective_inputs(self.world.clock))
            self.records.append(record)
            if tick % self.decimation == 0:
                self._publish(record)
            if self.tick_hz > 0:
                target = start + (tick + 1) / self.tick_hz
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
        self.finished.set()


def _state_message(world, record) -> dict:
    robots = []
    for side in ("right", "left"):
        rec = record.robots[side]
        st = world.states[side]
        tip = st.pose.translation + world.configs[side].shaft_length * st.pose.rotation[:, 2]
        robots.append(
            {
                "side": side,
                "theta": [float(x) for x in rec["theta"]],
                "tip": [float(x) for x in tip],
                "fsx": rec["fsx"],
                "fsy": rec["fsy"],
                "fs": rec["fs"],
                "ft": rec["ft"],
                "depth": rec["depth"],
                "delta": [rec["delta_x"], rec["delta_y"]],
                "pedal": rec["pedal"],
            }
        )
    return {
        "type": "state",
        "tick": world.tick_index - 1,  # tick that produced this record
        "t": record.t,
        "robots": robots,
        "events": list(record.events),
        "eye_rotvec": [float(x) for x in rotation_log(world.scene.orientation)],
    }


class TeleopServer:
    """Single-session WebSocket server bound to one live simulation."""

    def __init__(
        self,
        scenario: Scenario,
        host: str = "127.0.0.1",
        port: int = 0,
        tick_hz: float | None = None,
        decimation: int = DEFAULT_DECIMATION,
        max_ticks: int | None = None,
    ):
        self.scenario = scenario
        self.host = host
        self.port = port
        self.sim = _SimLoop(scenario, tick_hz, decimation, max_ticks)
        self._server = None
        self._session_ws = None
        self.log: TrialLog | None = None

    async def start(self) -> None:
        self.sim.loop = asyncio.get_running_loop()
        self.sim.snapshot_event = asyncio.Event()
        self._server = await serve(self._handler, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        self.sim.thread.start()

    async def stop(self) -> TrialLog:
        self.sim.stop()
        self.sim.finished.wait(timeout=10.0)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        meta = {
            "mode": self.scenario.mode,
            "posture": self.scenario.posture,
            "scenario_hash": scenario_hash(self.scenario),
            "seed": self.scenario.seed,
            "dt": self.scenario.dt,
            "dominant": "right",
            "completion_reason": "session-closed",
            "completion_time": self.sim.world.progress.completion_time,
            "touch_order": [
                self.scenario.task.colors[i] for i in self.sim.world.progress.touch_order
            ],
            "ticks": len(self.sim.records),
        }
        self.log = TrialLog(records=self.sim.records, meta=meta)
        return self.log

    async def wait_finished(self) -> None:
        """Block until the tick loop hits its tick budget (if any)."""
        while not self.sim.finished.is_set():
            await asyncio.sleep(0.02)

    async def _send_json(self, ws, payload: dict) -> None:
        await ws.send(json.dumps(payload))

    async def _handler(self, ws) -> None:
        if self._session_ws is not None:
            await self._send_json(ws, {"type": "error", "error": "session-busy"})
            await ws.close()
            return
        self._session_ws = ws
        self.sim.set_connected(True)
        scene = self.scenario.scene
        task = self.scenario.task
        await self._send_json(
            ws,
            {
                "type": "hello",
                "version": PROTOCOL_VERSION,
                "mode": self.scenario.mode,
                "dt": self.scenario.dt,
                "decimation": self.sim.decimation,
                "colors": list(task.colors),
                "scene": {
                    "center": [float(x) for x in scene.center],
                    "radius": scene.radius,
                    "retina_radius": scene.retina_radius,
                    "ports": scene.ports.tolist(),
                    "pins": task.pins.tolist(),
                    "start": task.start.tolist(),
                },
            },
        )
        broadcaster = asyncio.create_task(self._broadcast(ws))
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await self._send_json(ws, {"type": "error", "error": "bad-json"})
                    continue
                mtype = msg.get("type") if isinstance(msg, dict) else None
                if mtype == "input":
                    try:
                        side, rin = _parse_input_message(msg)
                    except ValueError as err:
                        await self._send_json(ws, {"type": "error", "error": str(err)})
                        continue
                    self.sim.submit_input(side, rin)
                elif mtype == "bye":
                    break
                else:
                    await self._send_json(ws, {"type": "error", "error": "unknown-type"})
        except ConnectionClosed:
            pass
        finally:
            broadcaster.cancel()
            self.sim.set_connected(False)  # pedal drops within one tick
            self._session_ws = None

    async def _broadcast(self, ws) -> None:
        event = self.sim.snapshot_event
        assert event is not None
        try:
            while True:
                await event.wait()
                event.clear()
                while self.sim.snapshots:
                    snap = self.sim.snapshots.popleft()
                    await self._send_json(ws, snap)
        except (ConnectionClosed, asyncio.CancelledError):
            pass


def serve_blocking(
    scenario: Scenario,
    host: str,
    port: int,
    tick_hz: float | None,
    out_dir: Path,
    duration: float | None,
) -> Path:
    """Run a teleop session until the duration cap (or forever), then write
    the session log; used by the CLI `serve` command."""
    max_ticks = None if duration is None else int(round(duration / scenario.dt))

    async def _main() -> TrialLog:
        server = TeleopServer(scenario, host=host, port=port, tick_hz=tick_hz,
                              max_ticks=max_ticks)
        await server.start()
        print(f"teleop session on ws://{server.host}:{server.port} "
              f"(mode {scenario.mode}, dt {scenario.dt})")
        try:
            if max_ticks is None:
                while True:
                    await asyncio.sleep(3600)
            else:
                await server.wait_finished()
        except (KeyboardInterrupt, asyncio.CancelledError):
            pass
        return await server.stop()

    try:
        log = asyncio.run(_main())
    except KeyboardInterrupt:
        raise SystemExit(0)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"session_{scenario_hash(scenario)}.csv"
    write_trial_csv(log, out_path)
    print(f"wrote {out_path}")
    return out_path
