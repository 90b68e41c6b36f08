use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use rentchain_core::Transaction;
use tokio::sync::{mpsc, oneshot};

use crate::engine::{BlockSummary, NodeCore, Rejection, Snapshot, Submitted};

fn publish(slot: &RwLock<Arc<Snapshot>>, core: &NodeCore) {
    *slot.write().expect("snapshot lock") = Arc::new(core.snapshot());
}

enum Command {
    Submit(Transaction, oneshot::Sender<Result<Submitted, Rejection>>),
    Mine(oneshot::Sender<Result<BlockSummary, Rejection>>),
}

/// Cloneable front for the writer thread. Writes are serialized through a
/// channel; reads come from the last published snapshot and never wait on
/// the writer.
#[derive(Clone)]
pub struct NodeHandle {
    commands: mpsc::UnboundedSender<Command>,
    snapshot: Arc<RwLock<Arc<Snapshot>>>,
}

impl NodeHandle {
    pub fn spawn(mut core: NodeCore) -> (NodeHandle, JoinHandle<NodeCore>) {
        let (commands, mut rx) = mpsc::unbounded_channel::<Command>();
        let snapshot = Arc::new(RwLock::new(Arc::new(core.snapshot())));
        let published = Arc::clone(&snapshot);
        let writer = std::thread::Builder::new()
            .name("rentchain-writer".into())
            .spawn(move || {
                while let Some(cmd) = rx.blocking_recv() {
                    // publish before replying so a caller sees its own write
                    match cmd {
                        Command::Submit(tx, reply) => {
                            let result = core.submit(tx);
                            publish(&published, &core);
                            let _ = reply.send(result);
                        }
                        Command::Mine(reply) => {
                            let result = core.mine_pending().map_err(Rejection::from);
                            publish(&published, &core);
                            let _ = reply.send(result);
                        }
                    }
                }
                core
            })
            .expect("spawn writer thread");
        (NodeHandle { commands, snapshot }, writer)
    }

    fn closed() -> Rejection {
        Rejection::new("Unavailable", "node writer has stopped")
    }

    pub async fn submit(&self, tx: Transaction) -> Result<Submitted, Rejection> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Submit(tx, reply))
            .map_err(|_| Self::closed())?;
        rx.await.map_err(|_| Self::closed())?
    }

    pub async fn mine(&self) -> Result<BlockSummary, Rejection> {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Command::Mine(reply)).map_err(|_| Self::closed())?;
        rx.await.map_err(|_| Self::closed())?
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }
}
