package org.acme.inventory.api;

import java.util.LinkedHashMap;
import java.util.Map;
import java.util.function.Consumer;

import org.acme.inventory.service.InventoryService;

public class Controller {
    private final InventoryService inventory;
    private final Map<String, Consumer<String[]>> handlers = new LinkedHashMap<>();

    public Controller(InventoryService inventory) {
        this.inventory = inventory;
        handlers.put("units", args -> System.out.println(inventory.totalUnits()));
        handlers.put("help", new Consumer<String[]>() {
            @Override
            public void accept(String[] args) {
                handlers.keySet().forEach(System.out::println);
            }
        });
    }

    @Command(value = "run", help = "dispatch one command")
    public boolean run(String name, String[] args) {
        Consumer<String[]> h = handlers.get(name);
        if (h == null) {
            return false;
        }
        h.accept(args);
        return true;
    }

    static class Registry {
        private int count;

        void register() {
            count++;
        }
    }
}
