//! Periodic harvesting of configured sources.

use std::sync::Arc;

use tokio::sync::{mpsc, watch};
use tokio::task::JoinSet;
use tokio::time::{interval, Instant, MissedTickBehavior};

use super::{HarvestMode, Harvester, SourceDescriptor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleEvent {
    Started { source_id: String, at: Instant },
    Finished { source_id: String, success: bool },
    /// A tick arrived while the previous harvest of the source was still running.
    Skipped { source_id: String },
}

/// Harvests every enabled source on its own interval until `shutdown` turns
/// true. The first harvest of each source starts immediately; it is a full
/// harvest when the source has never succeeded, incremental afterwards.
/// Harvests already in flight are awaited before returning.
pub async fn schedule_loop(
    harvester: Arc<Harvester>,
    sources: Vec<SourceDescriptor>,
    mut shutdown: watch::Receiver<bool>,
    events: Option<mpsc::UnboundedSender<ScheduleEvent>>,
) {
    let mut tickers = JoinSet::new();
    for source in sources.into_iter().filter(|s| s.enabled) {
        let harvester = Arc::clone(&harvester);
        let events = events.clone();
        let mut shutdown = shutdown.clone();
        tickers.spawn(async move {
            let mut ticks = interval(source.schedule);
            ticks.set_missed_tick_behavior(MissedTickBehavior::Skip);
            let mut runs = JoinSet::new();
            loop {
                tokio::select! {
                    _ = ticks.tick() => {}
                    _ = shutdown.wait_for(|stop| *stop) => break,
                }
                while runs.try_join_next().is_some() {}
                if !runs.is_empty() || harvester.is_running(&source.source_id) {
                    send(&events, ScheduleEvent::Skipped { source_id: source.source_id.clone() });
                    continue;
                }
                let harvester = Arc::clone(&harvester);
                let events = events.clone();
                let source = source.clone();
                runs.spawn(async move {
                    let mode = match harvester.states().load(&source.source_id) {
                        Ok(state) if state.last_success.is_some() => HarvestMode::Incremental,
                        _ => HarvestMode::Full,
                    };
                    send(&events, ScheduleEvent::Started { source_id: source.source_id.clone(), at: Instant::now() });
                    let result = harvester.harvest(&source, mode).await;
                    if let Err(e) = &result {
                        tracing::warn!(source = %source.source_id, error = %e, "scheduled harvest failed");
                    }
                    send(&events, ScheduleEvent::Finished { source_id: source.source_id.clone(), success: result.is_ok() });
                });
            }
            while runs.join_next().await.is_some() {}
        });
    }
    if tickers.is_empty() {
        let _ = shutdown.wait_for(|stop| *stop).await;
    }
    while tickers.join_next().await.is_some() {}
}

fn send(events: &Option<mpsc::UnboundedSender<ScheduleEvent>>, event: ScheduleEvent) {
    if let Some(tx) = events {
        let _ = tx.send(event);
    }
}
