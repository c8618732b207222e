import { ALL_COMMANDS, Command, LEGAL_TRANSITIONS, Phase } from "./protocol";

const legal = new Set(LEGAL_TRANSITIONS.map(([phase, command]) => `${phase}:${command}`));

export function isCommandLegal(phase: Phase, command: Command): boolean {
  return legal.has(`${phase}:${command}`);
}

// The projection the buttons render from: exactly the commands the server
// would accept in this phase, nothing optimistic.
export function enabledCommands(phase: Phase): Command[] {
  return ALL_COMMANDS.filter((command) => isCommandLegal(phase, command));
}
