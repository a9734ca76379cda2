/**
 * Interactive terminal console against a running backend
 * (`wristim serve --port N`).
 *
 * Commands:
 *   status | snap                       device + session state
 *   cal <thumb|index> [study1|study3]   start calibration
 *   + | step                            +0.1 mA press
 *   ch <n>                              switch candidate channel
 *   felt                                confirm threshold
 *   abort                               abort calibration
 *   study <study1|study2> [participant] start a study session
 *   next | auto                         run the next trial (manual/auto report)
 *   paint <row> <col> [radius]          paint perceived area
 *   erase <row> <col> [radius]          erase
 *   spot <row> <col>                    mark strongest point
 *   q <keyword>                         pick quality keyword
 *   map                                 draw the hand map with the mask
 *   submit                              submit the report
 *   reset                               reset a lockout
 *   quit
 */

import * as readline from "node:readline";
import { ConsoleSession } from "./session.js";
import { QUALITY_KEYWORDS } from "./types.js";

const GLYPHS: Record<string, string> = {
  "0": " ", "1": "w", "2": ".", "3": "t", "4": "i", "5": "m", "6": "r", "7": "l",
};

function drawMap(session: ConsoleSession): string {
  const snap = session.snapshot;
  const mask = session.mask;
  if (!snap || !mask) return "(no hand map yet)";
  const lines: string[] = [];
  snap.handmap.rows.forEach((row, r) => {
    let line = "";
    for (let c = 0; c < row.length; c++) {
      if (mask.strongest && mask.strongest[0] === r && mask.strongest[1] === c) {
        line += "X";
      } else if (mask.isPainted(r, c)) {
        line += "#";
      } else {
        line += GLYPHS[row[c]] ?? "?";
      }
    }
    lines.push(line);
  });
  return lines.join("\n");
}

function statusLine(session: ConsoleSession): string {
  const s = session.status;
  if (!s) return "(no status)";
  const fault = s.fault_reason ? ` (${s.fault_reason})` : "";
  const r = s.resistance_kohm == null ? "-" : s.resistance_kohm.toFixed(1);
  return `state=${s.state}${fault} mode=${s.mode} intensity=${s.intensity_ua} uA ` +
         `load=${r} kOhm t=${s.clock_ms} ms`;
}

async function dispatch(session: ConsoleSession, line: string): Promise<string> {
  const [cmd, ...args] = line.trim().split(/\s+/);
  switch (cmd) {
    case "status":
      await session.refresh();
      return statusLine(session);
    case "snap": {
      const snap = await session.refresh();
      return JSON.stringify(
        { mode: snap.mode, study: snap.study, calibrations: snap.calibrations },
        null, 2);
    }
    case "cal": {
      const reply = await session.stepper.start(args[0] ?? "thumb",
                                                args[1] ?? "study1");
      return reply.ok ? `calibrating ${args[0] ?? "thumb"}` : `! ${reply.error}`;
    }
    case "+":
    case "step": {
      const reply = await session.stepper.stepUp();
      if (!reply) return "! stepping disabled";
      const v = session.stepper.view();
      return reply.ok
        ? `intensity ${v.intensityUa} uA, felt=${v.felt}`
        : `! ${reply.error}`;
    }
    case "ch": {
      const reply = await session.stepper.switchChannel(Number(args[0]));
      return reply?.ok ? `channel ${args[0]}` : `! ${reply?.error ?? "no calibration"}`;
    }
    case "felt": {
      const reply = await session.stepper.confirmFelt();
      return reply?.ok
        ? `calibrated: ${JSON.stringify(reply.data)}`
        : `! ${reply?.error ?? "no calibration"}`;
    }
    case "abort": {
      const reply = await session.stepper.abort();
      return reply?.ok ? "calibration aborted" : `! ${reply?.error ?? "none"}`;
    }
    case "study": {
      const reply = await session.startStudy(args[0] ?? "study1", args[1] ?? "p01");
      return reply.ok ? `study started: ${JSON.stringify(reply.data)}` : `! ${reply.error}`;
    }
    case "next":
    case "auto": {
      const reply = await session.nextTrial(cmd === "auto");
      return reply.ok ? JSON.stringify(reply.data) : `! ${reply.error}`;
    }
    case "paint":
    case "erase": {
      if (!session.mask) return "! no trial";
      const [row, col, radius] = args.map(Number);
      const n = cmd === "paint"
        ? session.mask.paint(row, col, radius || 2)
        : session.mask.erase(row, col, radius || 2);
      await session.syncDraft();
      return `${cmd}ed ${n} cells (${session.mask.paintedCount()} painted)`;
    }
    case "spot": {
      if (!session.mask) return "! no trial";
      const check = session.mask.setStrongest(Number(args[0]), Number(args[1]));
      if (check.ok) await session.syncDraft();
      return check.ok ? "strongest point set" : `! ${check.error}`;
    }
    case "q": {
      if (!session.mask) return "! no trial";
      const check = session.mask.setQuality(args[0]);
      if (check.ok) await session.syncDraft();
      return check.ok ? `quality ${args[0]}`
                      : `! ${check.error}; one of ${QUALITY_KEYWORDS.join(", ")}`;
    }
    case "map":
      return drawMap(session);
    case "submit": {
      const reply = await session.submitReport();
      return reply.ok ? `submitted: ${JSON.stringify(reply.data)}` : `! ${reply.error}`;
    }
    case "reset": {
      const reply = await session.resetLockout();
      return reply.ok ? "lockout reset" : `! ${reply.error}`;
    }
    case "":
      return "";
    default:
      return `! unknown command '${cmd}'`;
  }
}

async function main(): Promise<void> {
  const port = Number(process.env.WRISTIM_PORT ?? process.argv[2] ?? 7801);
  const session = new ConsoleSession();
  try {
    await session.connect(port);
  } catch (err) {
    console.error(`cannot reach backend on port ${port}: ${err}`);
    process.exit(1);
  }
  console.log(`connected to backend on :${port}`);
  console.log(statusLine(session));
  session.onStatus = (status) => {
    if (status.state === "fault" || status.state === "lockout") {
      console.log(`\n!! device ${status.state} ${status.fault_reason ?? ""}`);
    }
  };
  session.startPolling();

  const rl = readline.createInterface({ input: process.stdin,
                                        output: process.stdout,
                                        prompt: "console> " });
  rl.prompt();
  rl.on("line", (line) => {
    if (line.trim() === "quit") {
      rl.close();
      return;
    }
    dispatch(session, line)
      .then((out) => {
        if (out) console.log(out);
      })
      .catch((err) => console.error(`! ${err}`))
      .finally(() => rl.prompt());
  });
  rl.on("close", () => {
    session.close();
    process.exit(0);
  });
}

main();
