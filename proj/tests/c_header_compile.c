/* The public header must stay consumable from plain C. */
#include <agentloop.h>
#include <stdio.h>

int main(void) {
    printf("agentloop %s\n", al_version());
    return al_version() == 0;
}
